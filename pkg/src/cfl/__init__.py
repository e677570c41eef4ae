"""Structural causal models and Rubin causal models on one seedable probability space."""

from .equivalence import (
    EquivalenceVerdict,
    Level,
    Verdict,
    compare,
    compare_almost_sure,
    compare_cross_outcome,
    compare_single_outcome,
    contrast_test,
    law_distance,
)
from .errors import *  # noqa: F401,F403
from .estimands import (
    EstimandReport,
    ate,
    cate_rcm,
    cate_scm,
    direct_effect_scm,
    interventional_cate,
    potential_law,
    relaxed_noise_cate_gap,
    theorem1_law,
    x_grid,
)
from .expr import parse, parse_equation
from .inference import conditional_mean, counterfactual_law, law
from .laws import Empirical, Engine, ExactTable, GaussianMixture
from .noise import (
    Bernoulli,
    Discrete,
    Gaussian,
    NoiseSpace,
    NoiseSpec,
    PointMass,
    Uniform,
    enumerate_noise,
    rng,
    sample_noise,
    split_stream,
)
from .rcm import (
    CheckReport,
    FunctionalRcm,
    check_consistency,
    check_ignorability,
    check_positivity,
    entailed_rcm,
    identify_single_outcome,
    observational,
    outcome_equation_rcm,
    propensity,
    structural_representation,
    user_rcm,
)
from .scenarios import Report, Scenario, builtin_scenarios, dump_scenario, load_scenario, run
from .scm import (
    Intervention,
    ScmModel,
    apply_do,
    check_assumptions,
    make_model,
    outcome_equation_intervention,
    solve,
    validate,
    vectorize,
)

__version__ = "0.1.0"
