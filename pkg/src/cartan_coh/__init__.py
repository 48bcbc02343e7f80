"""Exact rational cohomology for formal vector fields, finite groupoids,
Cartan algebroids and jet groupoids."""

__version__ = "0.1.0"
