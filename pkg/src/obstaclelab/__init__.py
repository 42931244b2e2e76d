"""Numerical laboratory for maps from the 2-disk constrained outside the unit ball.

The map u = lambda * v splits into a scalar factor lambda = |u| >= 1 solving a
convex obstacle problem and a sphere-valued direction v solving a weighted
harmonic-map problem; an alternating driver couples the two, and the analysis
module measures the structural identities (conservation laws, Hodge/Wente
estimates, viscosity inequalities, difference-quotient bounds) that govern
the pair's regularity.
"""

from .alternation import CriticalPoint, JointConfig, resume, solve_critical
from .analysis import (
    DecayFit,
    HodgeParts,
    ViscosityReport,
    difference_quotient_energy,
    free_boundary,
    harmonic_decay_check,
    hodge_decompose,
    holder_seminorm,
    morrey_fit,
    polyline_circularity,
    viscosity_report,
    wente_check,
)
from .errors import (
    DomainError,
    GridMismatchError,
    InvalidResolutionError,
    NonConvergenceError,
    ObstacleLabError,
)
from .fields import (
    MapField,
    ObstacleField,
    SphereField,
    assemble_u,
    dirichlet_energy,
    map_gradient,
    split_energy,
    weight_field,
)
from .mesh import (
    CovectorField,
    DiskGrid,
    ScalarField,
    ball_norm,
    build_disk_grid,
    divergence,
    gradient,
    laplacian,
)
from .obstacle import (
    KKTReport,
    ObstacleSolveConfig,
    contact_radius,
    kkt_report,
    solve_obstacle,
    subharmonicity_margin,
)
from .rotation import (
    RotationField,
    RotationSolveConfig,
    rotation_conservation_residual,
    solve_rotation,
)
from .sphere import (
    AntisymPotential,
    SphereSolveConfig,
    antisym_potential,
    edge_weight_field,
    el_residuals,
    solve_sphere,
    tangential_residual,
)

__version__ = "0.1.0"
