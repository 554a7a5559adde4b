"""Error exponents and tail rate functions for constant-composition codes under GLD decoding."""

from .core import bsc, z_channel
from .ensemble import (Codebook, exact_enumerator_hit_prob, exact_error_prob, pair_enumerator,
                       sample_codebook, tail_experiment)
from .exponents import (ExponentCurve, ExponentResult, e0_min, e_tilde, exponent_curve,
                        expurgated_exponent, lt_lower, lt_upper, random_coding_exponent, trc_exponent, trc_exponent_ml,
                        ut_lower, ut_upper)
from .functionals import ModelConfig, alpha, beta_fn, gamma_fn, lambda_fn
from .gld import GldMetric
from .optimizer import GridSpec

__version__ = "0.1.0"

__all__ = [
    "bsc", "z_channel",
    "Codebook", "exact_enumerator_hit_prob", "exact_error_prob", "pair_enumerator",
    "sample_codebook", "tail_experiment",
    "ExponentCurve", "ExponentResult", "e0_min", "e_tilde", "exponent_curve", "expurgated_exponent",
    "lt_lower", "lt_upper", "random_coding_exponent", "trc_exponent", "trc_exponent_ml",
    "ut_lower", "ut_upper",
    "ModelConfig", "alpha", "beta_fn", "gamma_fn", "lambda_fn",
    "GldMetric", "GridSpec",
]
