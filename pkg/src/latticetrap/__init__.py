"""Surface-electrode rf lattice design: fields, trap sites, simulation metrics and optimization."""

__version__ = "0.1.0"
