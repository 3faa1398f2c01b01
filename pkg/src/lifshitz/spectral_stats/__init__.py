"""Monte Carlo spectral statistics of random breather operators."""

from .common import SampleContext, cutoff_on_grid, smoothstep_cutoff
from .decay import (
    CtConstants,
    CtDecay,
    IlseResult,
    calibrate_combes_thomas,
    ct_decay,
    estimate_c_prime,
    ilse_blocks,
    ilse_probability,
    slab_blocks,
)
from .ids import IdsCurve, ids_curve
from .lower import (
    DecayMargin,
    E0Row,
    LowerBoundConfig,
    WitnessResult,
    approximation_constant,
    cutoff_state,
    e0_identification,
    lower_bound_witness,
    summable_decay_margin,
)
from .tails import (
    CRITICAL,
    GAP,
    EnergyGrid,
    ExponentFit,
    TailEstimate,
    box_length,
    fit_lifshitz_exponent,
    fit_tail,
    tail_probability,
)

__all__ = [
    "CRITICAL",
    "GAP",
    "CtConstants",
    "CtDecay",
    "DecayMargin",
    "E0Row",
    "EnergyGrid",
    "ExponentFit",
    "IdsCurve",
    "IlseResult",
    "LowerBoundConfig",
    "SampleContext",
    "TailEstimate",
    "WitnessResult",
    "approximation_constant",
    "box_length",
    "calibrate_combes_thomas",
    "ct_decay",
    "cutoff_on_grid",
    "cutoff_state",
    "e0_identification",
    "estimate_c_prime",
    "fit_lifshitz_exponent",
    "fit_tail",
    "ids_curve",
    "ilse_blocks",
    "ilse_probability",
    "lower_bound_witness",
    "slab_blocks",
    "smoothstep_cutoff",
    "summable_decay_margin",
    "tail_probability",
]
