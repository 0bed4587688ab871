"""Python bindings for the bamld C++ core."""

import json as _json

from ._core import (
    ConfigError,
    GpConfig,
    NumericalError,
    ParseError,
    ParticleEnsemble,
    SelectionError,
    ShapeError,
    aleatoric_term,
    bamld_score,
    cluster_amplitude_range,
    condition_gp,
    eval_g_bo,
    eval_sinusoid,
    fit_posterior,
    gaussian_entropy,
    kernel_matrix,
    log_marginal_likelihood,
    log_marginal_likelihood_grad,
    log_posterior_score,
    mixture_entropy,
    run_property_suite,
    sample_initial_ensemble,
    uncertainty_score,
    vanilla_bo,
)
from ._core import run_experiment as _run_experiment


def run_experiment(config, profile=None):
    """Run an experiment described by a dict of flat config keys.

    Returns the path of the written results.csv.
    """
    config = dict(config)
    profile = profile or config.get("profile", "desk")
    return _run_experiment(_json.dumps(config), profile)
