"""Layer potentials, cell problems and homogenization checks for the Lamé system in perforated domains."""

from .geometry import LameParams, make_curve, panelize, build_perforation, parse_hole

__all__ = ["LameParams", "make_curve", "panelize", "build_perforation", "parse_hole"]
__version__ = "0.1.0"
