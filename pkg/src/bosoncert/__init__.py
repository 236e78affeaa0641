"""Simulation and suppression-law certification of Boson-Sampling devices."""

from .events import (
    CapExceededError,
    InputConfig,
    OccupationEvent,
    count_events,
    enumerate_events,
    event_array,
    is_collision_free,
    multiplicity_factor,
    rank_event,
    same_half,
    unrank_event,
)
from .linalg import (
    ModeUnitary,
    PerturbationField,
    make_cyclic_input,
    make_fourier,
    make_haar_random,
    make_walk_matrix,
    perturb,
)
from .permanent import (
    boson_probability,
    classical_probability,
    misaligned_probability,
    permanent_naive,
    permanent_ryser,
    permanents,
)
from .samplers import (
    SampleBatch,
    sample_boson,
    sample_classical,
    sample_meanfield,
    sample_misaligned,
    sample_uniform,
)
from .certify import (
    ViolationReport,
    WitnessSummary,
    distinguishability_coeffs,
    expected_violation_exact,
    is_forbidden,
    p_approx,
    required_runs,
    v_dev_estimate,
    v_dev_numeric,
    violation,
    violation_bound_partial,
    witnesses,
)

__version__ = "0.1.0"
