"""
Shot noise and the eigenvalue cutoff
====================================

A shot-sampled Gram matrix is symmetric but usually not positive
semidefinite. This walk-through measures how far off it is and what the
cutoff does about it.
"""

# %%
import numpy as np

from qgpbo import FeatureMapSpec, Family, KernelMode, QuantumKernelConfig, gram, regularize_cutoff

spec = FeatureMapSpec(Family.CHEBYSHEV_HWE, num_qubits=4, num_layers=2)
theta = np.random.default_rng(1).uniform(0, 2 * np.pi, spec.num_params)
X = np.linspace(-1, 1, 30)[:, None]

exact = gram(X, None, QuantumKernelConfig(spec, theta))
print(f"exact Gram: min eigenvalue {exact.min_eigenvalue():.2e}")

# %%
# Entrywise error falls like 1/sqrt(shots); the negative spectrum shrinks with it.
for shots in (100, 1_000, 10_000, 100_000):
    cfg = QuantumKernelConfig(spec, theta, KernelMode.SAMPLED, shots, master_seed=7)
    sampled = gram(X, None, cfg)
    fixed = regularize_cutoff(sampled)
    err = np.sqrt(np.mean((sampled.entries - exact.entries) ** 2))
    print(
        f"shots={shots:>7d}  rms error {err:.4f}  min eigenvalue {sampled.min_eigenvalue():+.4f}"
        f"  clipped mass {fixed.clipped_mass:.4f}  after cutoff {fixed.min_eigenvalue():+.1e}"
    )

# %%
# The cutoff is the Frobenius-nearest PSD matrix. The 2x2 case by hand:
# eigenvalues of [[1, 1.1], [1.1, 1]] are 2.1 and -0.1.
G = regularize_cutoff(np.array([[1.0, 1.1], [1.1, 1.0]]))
print(G.entries, G.clipped_mass)
