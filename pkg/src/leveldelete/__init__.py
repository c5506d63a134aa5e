"""Level deletion for exactly solvable quantum systems.

Seed families with their spectra and eigenpolynomials, deletion of an
admissible set of levels through Wronskians or Casoratians, closed forms for
deleting ``{1, ..., ell}``, and a numerical verification harness.
"""
from .family_catalog import Family, Poly, System, make_system
from .krein_adler import DeletionSet, ModifiedSystem, build_modified, validate_deletion
from .special_ell import EllSystem, xi_ell

__all__ = [
    "Family", "Poly", "System", "make_system", "DeletionSet", "ModifiedSystem",
    "build_modified", "validate_deletion", "EllSystem", "xi_ell",
]
__version__ = "0.1.0"
