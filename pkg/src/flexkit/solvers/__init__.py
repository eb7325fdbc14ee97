"""Self-contained optimization engines used by the flexibility analyses."""
from .lp import (INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, LPProblem,
                 SolveOutcome, dual_objective, solve_lp)

__all__ = ["LPProblem", "SolveOutcome", "solve_lp", "dual_objective",
           "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "ITERATION_LIMIT"]
from .barrier import newton_barrier_max  # noqa: E402
from .bnb import BnBConfig, BnBResult, Relaxation, branch_and_bound  # noqa: E402
from .qp import QPProblem, solve_qp  # noqa: E402

__all__ += ["QPProblem", "solve_qp", "newton_barrier_max", "BnBConfig", "BnBResult",
            "Relaxation", "branch_and_bound"]
