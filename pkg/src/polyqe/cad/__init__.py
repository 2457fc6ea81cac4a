"""Lazard-style cylindrical algebraic decomposition."""
from .core import (CadData, CadStats, Cell, Curtain, RequiresNewCad, check_refines,
                   detect_curtain, extend_cad, lazard_eval, lift_stack, partial_cad, select_ec)
from .projection import Projection, ec_project, irreducible_parts, lazard_project
from .solution import solution_formula

__all__ = [
    "CadData", "CadStats", "Cell", "Curtain", "RequiresNewCad", "check_refines", "detect_curtain",
    "extend_cad", "lazard_eval", "lift_stack", "partial_cad", "select_ec", "Projection",
    "ec_project", "irreducible_parts", "lazard_project", "solution_formula",
]
