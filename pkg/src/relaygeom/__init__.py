"""Distance-relay characteristics as Minkowski sums, and inverter
auxiliary-signal design via infeasibility certificates."""

from .netmodel import (
    LineSpec,
    NetworkMatrices,
    PhaseVector,
    Scenario,
    SourceKind,
    SourceSpec,
    ThreePhaseNetwork,
    balanced,
    build_admittance,
    compute_network_matrices,
    fault_stamp,
    phase_to_seq,
    seq_to_phase,
)
from .geom import Polygon, Zonogon, Zonotope, convex_hull, minkowski_sum
from .faults import DegenerateLoop, LoopSpec, loop_spec, posttest_coeffs, pretest_coeffs
from .uncertainty import (
    AuxSignal,
    InjectionKind,
    NoiseSet,
    SourceUncertainty,
    balanced_uncertainty,
    norm_ball_noise,
    product_polygon_noise,
)
from .posttest import (
    Characteristic,
    apply_cut,
    exact_characteristic,
    is_consistent,
    max_overreach_free_reach,
    zonogon_characteristic,
)
from .pretest import IntersectionContext, WVariant, build_intersection, build_pretest, build_w
from .sep import SeparationVerdict, Verdict, build_dual, check_separation, scan_uniform_injection
from .auxopt import AdmmConfig, AuxOptResult, objective, optimize_auxiliary

__version__ = "0.1.0"
