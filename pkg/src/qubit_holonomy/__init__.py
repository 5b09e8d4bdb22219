"""Work holonomy of a driven dissipative qubit on the triality manifold."""

__version__ = "0.1.0"

from .bloch import (  # noqa: E402
    BathSpec,
    BlochVector,
    Controls,
    TrialityPoint,
    bloch_rhs,
    gibbs_state,
    ness_closed_form,
    ness_linear_solve,
    phase_of_ness,
    relax_to_ness,
    to_triality,
)
from .geometry import (  # noqa: E402
    connection_gibbs,
    connection_pointer,
    curvature_closed_form,
    curvature_fd,
    curvature_phase_resolved,
    free_energy_gibbs,
    regularized_curvature,
    weak_mismatch_coefficient,
)
from .transport import (  # noqa: E402
    ControlPath,
    DriveProtocol,
    curvature_flux,
    dynamic_work,
    loop_work_gibbs,
    loop_work_quasistatic,
    stokes_residual,
)
