"""Gaussian process regression with fidelity quantum kernels, and Bayesian
optimization that uses it as a surrogate."""

from .bayesopt import (
    AcquisitionConfig,
    Bounds,
    BoTrace,
    bo_run,
    branin,
    expected_improvement,
    propose_next,
    random_search,
    xsinx,
)
from .featuremap import Family, FeatureMapSpec, ScalingSpec, build
from .gp import QuantumKernel, RBFKernel, fit, log_marginal_likelihood, predict, train_mll, train_rbf
from .qkernel import GramMatrix, KernelMode, QuantumKernelConfig, gram, kernel_exact, kernel_sampled, regularize_cutoff
from .simulator import Circuit, GateKind, GateOp, StateVector, run_circuit

__version__ = "0.1.0"
