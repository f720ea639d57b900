"""Energy-stable IEQ time stepping for Landau-de Gennes Q-tensor gradient flows.

Modules:

- :mod:`~qtensor_ieq.tensor`: pointwise algebra of trace-free symmetric tensors
- :mod:`~qtensor_ieq.grid`: uniform grids, finite differences, field files
- :mod:`~qtensor_ieq.stepper`: the linear update, conjugate gradients, one step
- :mod:`~qtensor_ieq.diagnostics`: energies, drift of ``r``, higher-order energy
- :mod:`~qtensor_ieq.oracle`: fine references, baseline scheme, convergence studies
- :mod:`~qtensor_ieq.config`, :mod:`~qtensor_ieq.driver`, :mod:`~qtensor_ieq.cli`: runs
"""
from .errors import (
    GridMismatch,
    NonpositiveRadicand,
    NotConverged,
    OutOfRange,
    ReferenceUnconverged,
    RPositivityLost,
    StrideTooCoarse,
)
from .diagnostics import (
    DiagnosticsRecord,
    Monitor,
    Trajectory,
    drift_fields,
    energy,
    grad_rp_norm,
    interpolant_eval,
)
from .grid import Grid, read_field, write_field
from .oracle import (
    ConvergenceStudy,
    Problem,
    baseline_agreement,
    baseline_step,
    default_problem,
    fine_reference,
    fit_order,
    linear_problem,
    run_convergence_study,
    zero_problem,
)
from .stepper import SchemeState, SolveReport, apply_update_operator, build_rhs, cg_solve, h_field, step
from .tensor import (
    ModelParams,
    bulk_potential,
    frobenius_dot,
    p_of_Q,
    r_of_Q,
    s_of_Q,
    taylor_remainder,
    to_matrix,
    uniaxial,
)

__version__ = "0.1.0"
