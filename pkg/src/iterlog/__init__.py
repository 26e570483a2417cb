"""Martingale approximations for stationary processes.

The package splits a stationary path sum S_n into a martingale M_n and a
remainder R_n through resolvent functions of the transfer operator, builds
the weight/inverse-coefficient apparatus with certified series tails,
evaluates the summability conditions that drive iterated-logarithm
behavior, and verifies that behavior on bundled process families with
long-horizon seeded Monte Carlo.

Typical use::

    import iterlog as il

    model = il.chain2(0.25, 0.25)
    path = il.sample_path(model, 100_000, seed=7)
    dec = il.decompose(path, model, il.epsilon_for(path.n))

See the demos/ directory for narrative walkthroughs of each capability,
and the ``iterlog`` command line for config-driven experiment runs.
"""

from .slowly_varying import (
    SlowlyVaryingSpec,
    EllStarAccumulator,
    eval_ell,
    ell_star,
    potter_check,
    parse_ell,
    format_ell,
)
from .coefficients import (
    CoefficientTable,
    FourierEval,
    normalization_constant,
    beta_table,
    alpha_table,
    prop3_ratio,
    cn_mass,
    b_eval,
    a_eval,
)
from .functions import PiecewiseLinear, LinearFunctional, ConstFn
from .processes import (
    IID,
    LinearProcess,
    FiniteMarkovChain,
    BernoulliShift,
    PathSample,
    iid_process,
    ma_process,
    geometric_linear,
    slow_linear,
    markov_chain,
    chain2,
    bernoulli_shift,
    parse_process,
    format_process,
    sample_path,
    path_stream,
    apply_Q,
    exact_cond_Sn,
    sigma2_analytic,
)
from .martingale import (
    Resolvent,
    MartingaleDecomposition,
    resolvent_h,
    poisson_resolvent,
    epsilon_for,
    decompose,
    martingale_residual_check,
    sigma2,
    remainder_norm_diagnostics,
)
from .conditions import (
    ConditionReport,
    VSequence,
    cond_norm_seq,
    mw_series,
    linear_criterion,
    bernoulli_energy,
    dyadic_check,
)
from .experiments import (
    LILReport,
    FLILReport,
    CCLTReport,
    RemainderGrowthReport,
    run_lil,
    run_flil,
    run_cclt,
    remainder_growth,
    lil_denominator,
)

__version__ = "0.1.0"
