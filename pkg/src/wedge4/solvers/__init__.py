from .common import SolveReport, SolverOptions
from .graph import PotentialState, graph_form, graph_operator, graph_solve
from .ma import hessian_parts, ma_form, ma_operator, ma_solve
from .general import (GeneralState, Linearization, SliceSpec, default_state, gauge_fix,
                      general_operator, general_solve, moduli_kernel)

__all__ = [
    "SolveReport", "SolverOptions", "PotentialState", "graph_form", "graph_operator", "graph_solve",
    "hessian_parts", "ma_form", "ma_operator", "ma_solve", "GeneralState", "Linearization",
    "SliceSpec", "default_state", "gauge_fix", "general_operator", "general_solve", "moduli_kernel",
]
