"""Recover 1-step causal structure among observed processes of a dynamical
system whose latent states evolve without noise."""

from .dynamics import (
    ConsensusParams,
    GenerationError,
    InstabilityError,
    LatentLinearSystem,
    NonlinearExampleState,
    SupportMatrix,
    Trajectory,
    nilpotency_index,
    reduced_var_coeffs,
    simulate_consensus,
    simulate_linear,
    simulate_nonlinear_example,
    true_support,
)
from .experiments import CurvePoint, Fig1Config, run_fig1, run_intro_example, run_nonlinear
from .infotheory import CmiEstimate, SampleSet, cmi_knn, edge_test, gaussian_cmi, knn_entropy
from .varfit import VarFit, fit_var, recover_support, support_error, wald_statistic

__version__ = "0.1.0"
