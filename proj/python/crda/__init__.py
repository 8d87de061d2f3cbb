"""Recovery planning for grids under load-altering attacks.

Thin wrapper over the compiled ``_core`` module. Plans come back as plain
dictionaries.
"""

import json

from . import _core
from ._core import (
    BackendError,
    BudgetError,
    CaseError,
    CrdaError,
    GridCase,
    InfeasibleError,
    ModelError,
    PlanningInputs,
    attack_gain_bounds,
    available_backends,
    compute_inputs,
    export_lp,
    index_to_availability,
    load_case,
    oracle_optimum,
    order_matrix,
    scenario_index,
    simulate,
    spectral_abscissa,
    system_matrix,
    worst_case_gains,
)


def parse_case(doc):
    """Build a case from a dict or a JSON string."""
    if not isinstance(doc, str):
        doc = json.dumps(doc)
    return _core.parse_case(doc)


def solve_joint(grid, inputs=None, time_limit=None, backend=""):
    if inputs is None:
        inputs = compute_inputs(grid)
    return json.loads(_core.solve_joint(grid, inputs, time_limit, backend))


def solve_decoupled(grid, inputs=None, time_limit=None, backend=""):
    if inputs is None:
        inputs = compute_inputs(grid)
    return json.loads(_core.solve_decoupled(grid, inputs, time_limit, backend))


__all__ = [name for name in dir() if not name.startswith("_") and name != "json"]
