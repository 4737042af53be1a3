"""Production-planning MILP models on a small in-house simplex and branch-and-bound solver."""

from .errors import InputError, ResourceLimitError
from .lp import LpOutcome, LpProblem, LpStatus, Relation, Row, Sense, solve_lp
from .mip import MipStatus, Model, Solution, SolveParams, SosKind, VarKind, new_model, solve_mip

__all__ = [
    "InputError", "ResourceLimitError",
    "LpOutcome", "LpProblem", "LpStatus", "Relation", "Row", "Sense", "solve_lp",
    "MipStatus", "Model", "Solution", "SolveParams", "SosKind", "VarKind", "new_model", "solve_mip",
]
