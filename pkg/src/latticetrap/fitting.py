"""Least-squares fits of the scaling laws used to summarize optimization studies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["FORMS", "FitResult", "FitError", "fit_scaling_law", "fit_line_through_origin", "model_eval"]


class FitError(ValueError):
    pass


# label -> (parameter names, minimum number of points)
FORMS = {
    "a+bN^-B": (("a", "b", "B"), 4),
    "c+dN^-E": (("c", "d", "E"), 4),
    "o+pm^-0.5": (("o", "p"), 3),
    "linear": (("k",), 2),
}


def model_eval(form: str, params, x):
    x = np.asarray(x, float)
    if form in ("a+bN^-B", "c+dN^-E"):
        a, b, B = params
        return a + b * x ** (-B)
    if form == "o+pm^-0.5":
        o, p = params
        return o + p / np.sqrt(x)
    if form == "linear":
        return params[0] * x
    raise FitError(f"unknown model form {form!r}")


@dataclass(frozen=True)
class FitResult:
    form: str
    names: tuple[str, ...]
    params: np.ndarray
    stderr: np.ndarray
    covariance: np.ndarray
    residuals: np.ndarray
    rss: float
    r_squared: float
    converged: bool
    domain: tuple[float, float]
    n_starts: int = 1
    messages: tuple[str, ...] = field(default_factory=tuple)

    def as_dict(self) -> dict:
        return {
            "form": self.form,
            "params": dict(zip(self.names, map(float, self.params))),
            "stderr": dict(zip(self.names, map(float, self.stderr))),
            "covariance": self.covariance.tolist(),
            "residuals": self.residuals.tolist(),
            "rss": self.rss,
            "r_squared": self.r_squared,
            "converged": self.converged,
            "domain": list(self.domain),
        }

    def __call__(self, x):
        return model_eval(self.form, self.params, x)


def _r_squared(y, resid) -> float:
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else -math.inf
    return 1 - ss_res / ss_tot


def _finish(form, names, x, y, w, p, J, converged, n_starts, msgs=(), absolute_sigma=False):
    resid = y - model_eval(form, p, x)
    rss = float(np.sum((w * resid) ** 2))
    dof = len(x) - len(p)
    Jw = J * w[:, None]
    try:
        cov = np.linalg.inv(Jw.T @ Jw)
        if not absolute_sigma:
            cov = cov * (rss / dof if dof > 0 else math.inf)
    except np.linalg.LinAlgError:
        cov = np.full((len(p), len(p)), math.inf)
    err = np.sqrt(np.abs(np.diag(cov)))
    return FitResult(form, names, np.asarray(p, float), err, cov, resid, rss, _r_squared(y, resid),
                     converged, (float(x.min()), float(x.max())), n_starts, tuple(msgs))


def fit_line_through_origin(x, y) -> FitResult:
    """y = k x by least squares; R^2 about the mean of y."""
    return fit_scaling_law(x, y, "linear")


def _power_jac(p, x):
    a, b, B = p
    t = x ** (-B)
    return np.column_stack([np.ones_like(x), t, -b * t * np.log(x)])


def _linear_given_B(x, y, w, B):
    X = np.column_stack([np.ones_like(x), x ** (-B)]) * w[:, None]
    coef, *_ = np.linalg.lstsq(X, y * w, rcond=None)
    return coef


def _lm(x, y, w, p0, max_iter=500, tol=1e-15):
    """Levenberg-Marquardt on the normal equations with multiplicative damping."""
    p = np.array(p0, float)

    def cost(q):
        r = w * (y - model_eval("a+bN^-B", q, x))
        return float(r @ r)

    c = cost(p)
    lam = 1e-3
    for _ in range(max_iter):
        J = _power_jac(p, x) * w[:, None]
        r = w * (y - model_eval("a+bN^-B", p, x))
        g = J.T @ r
        Hm = J.T @ J
        improved = False
        for _ in range(40):
            step = np.linalg.solve(Hm + lam * np.diag(np.diag(Hm) + 1e-300), g)
            pn = p + step
            cn = cost(pn) if np.all(np.isfinite(pn)) else math.inf
            if cn <= c:
                improved = True
                lam = max(lam / 10, 1e-15)
                break
            lam *= 10
        if not improved:
            return p, c, True
        dc = c - cn
        p, c = pn, cn
        if dc <= tol * max(c, 1e-300) or np.max(np.abs(step) / (np.abs(p) + 1e-300)) < 1e-13:
            return p, c, True
    return p, c, False


def fit_scaling_law(x, y, form: str, sigma=None, seed: int = 0, n_starts: int = 16,
                    absolute_sigma: bool = False) -> FitResult:
    """Fit one of the scaling-law forms.

    Parameter errors come from s^2 (J^T W J)^-1, with s^2 the reduced chi-square;
    with ``absolute_sigma`` the given sigma are taken as known and s^2 = 1.
    """
    if absolute_sigma and sigma is None:
        raise FitError("absolute_sigma needs sigma")
    if form not in FORMS:
        raise FitError(f"unknown model form {form!r}")
    names, min_pts = FORMS[form]
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("x and y must be 1-D arrays of equal length")
    if len(x) < min_pts:
        raise FitError(f"form {form} needs at least {min_pts} points, got {len(x)}")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise FitError("non-finite data")
    w = np.ones_like(x) if sigma is None else 1 / np.asarray(sigma, float)

    if form == "linear":
        k = float(np.sum(w**2 * x * y) / np.sum(w**2 * x * x))
        return _finish(form, names, x, y, w, [k], x[:, None], True, 1, absolute_sigma=absolute_sigma)
    if form == "o+pm^-0.5":
        if np.any(x <= 0):
            raise FitError("o+pm^-0.5 needs positive abscissae")
        X = np.column_stack([np.ones_like(x), x**-0.5])
        coef, *_ = np.linalg.lstsq(X * w[:, None], y * w, rcond=None)
        return _finish(form, names, x, y, w, coef, X, True, 1, absolute_sigma=absolute_sigma)

    if np.any(x <= 0):
        raise FitError("power-law forms need positive abscissae")
    rng = np.random.default_rng(seed)
    starts = np.concatenate([[0.5, 1.0], rng.uniform(0.05, 3.0, max(0, n_starts - 2))])
    best = None
    any_conv = False
    for B0 in starts:
        a0, b0 = _linear_given_B(x, y, w, B0)
        p, c, conv = _lm(x, y, w, [a0, b0, B0])
        any_conv |= conv
        if np.all(np.isfinite(p)) and (best is None or c < best[1]):
            best = (p, c, conv)
    if best is None:
        raise FitError("no start produced a finite fit")
    p, c, conv = best
    msgs = () if conv else (f"not converged; best rss {c:.3g}",)
    return _finish(form, names, x, y, w, p, _power_jac(p, x), conv, len(starts), msgs, absolute_sigma)
