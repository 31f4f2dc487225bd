"""Greedy algorithms (XGA, DGA and weak variants) for Haar dictionaries in L_p."""

from .greedy import (
    AlgorithmConfig,
    GreedyStepRecord,
    GreedyTrace,
    Kind,
    NumericalFailure,
    Status,
    estimate_gamma,
    greedy_approximant,
    greedy_step,
    run,
    run_batch,
    select_dual,
    select_x,
)
from .haar import (
    DyadicFunction,
    HaarCoefficients,
    HaarDictionary,
    analyze,
    haar_as_dyadic,
    haar_index_decompose,
    haar_norm,
    lp_norm,
    synthesize,
    truncation_norm_check,
)
from .lp import (
    LineSearchError,
    LineSearchResult,
    NormingFunctional,
    SmoothnessEstimate,
    estimate_modulus,
    gamma_bound_exponent,
    line_minimize,
    norming_functional,
    pairing,
)
from .partitions import (
    IntervalPartition,
    Order,
    PropertyPReport,
    all_partitions,
    estimate_zeta,
    interval_partition,
    lex_compare,
    n0_bound,
    norm_upper_bound_check,
    h1_shift_check,
    property_p_minimizer,
    termination_bound,
    total_bound,
    verify_lex_lemma,
    verify_n0_lemma,
    zeta_formula,
)

__version__ = "0.1.0"
