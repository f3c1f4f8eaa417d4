"""Prior machinery: covariance estimation and the synthetic data generator.

The generator follows the Bayesian model the solvers are derived from:
every factor entry is drawn from a density proportional to
``exp(-x²/(2 R_n(i,i)) - μ|x|)``, small entries are gated to zero, the
clean tensor is the CP reconstruction, Gaussian noise is added at a
requested SNR and entries are dropped at random.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from tensors.errors import UnsupportedInputError
from tensors.tensor_ops import FactorSet, MaskedTensor, cp_reconstruct, mode_unfold

logger = logging.getLogger(__name__)

COVARIANCE_FLOOR = 1e-8

# (first entry range, remaining entries range) per mode of the 3-way scheme
SIMULATION_COVARIANCE_RANGES = (
    ((101.0, 131.0), (1.0, 31.0)),
    ((1001.0, 1021.0), (1.0, 21.0)),
    ((10001.0, 10011.0), (1.0, 11.0)),
)


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Parameters of the generating model.

    - mode_cov_diags: diagonals of the per-mode covariances R_n (all > 0)
    - mu: l1 prior weight
    - gate: entries with |x| < gate are set to 0
    - snr_db: optional signal-to-noise ratio in dB; None means no noise
    - missing_fraction: probability of dropping each entry, in [0, 1)
    """

    mode_cov_diags: Tuple[np.ndarray, ...]
    mu: float = 0.1
    gate: float = 0.5
    snr_db: Optional[float] = None
    missing_fraction: float = 0.0

    def __post_init__(self) -> None:
        diags = tuple(np.asarray(d, dtype=float) for d in self.mode_cov_diags)
        for n, d in enumerate(diags):
            if d.ndim != 1 or not np.all(d > 0):
                raise ValueError(f"covariance diagonal of mode {n} must be a positive vector")
        if self.mu < 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")
        if self.gate < 0:
            raise ValueError(f"gate must be nonnegative, got {self.gate}")
        if not 0.0 <= self.missing_fraction < 1.0:
            raise ValueError(f"missing_fraction must lie in [0, 1), got {self.missing_fraction}")
        object.__setattr__(self, "mode_cov_diags", diags)


@dataclass(frozen=True, eq=False)
class SyntheticInstance:
    """A generated problem: true factors, clean tensor, observation and noise."""

    truth: FactorSet
    clean: np.ndarray
    observed: MaskedTensor
    noise_sigma: float
    noise: np.ndarray


def estimate_covariance_diags(
    z: Union[MaskedTensor, np.ndarray], rank: int
) -> Tuple[float, List[np.ndarray]]:
    """Estimate ``theta`` and the diagonals of every R_n from the data.

    Drops the expectation in ``K_n = R theta^(N-1) R_n`` and
    ``E||X||² = R theta^N``: ``theta = (||X||²/R)^(1/N)``,
    ``K_n(i,i) = ||X_(n)(i,:)||²`` and ``R_n(i,i) = K_n(i,i)/(R theta^(N-1))``,
    each floored at ``COVARIANCE_FLOOR``. Masked input is used as ``Z ⊛ Δ``.
    """
    x = z.observed if isinstance(z, MaskedTensor) else np.asarray(z, dtype=float)
    if rank < 1:
        raise ValueError(f"rank guess must be >= 1, got {rank}")
    total = float(np.sum(x * x))
    if total == 0.0:
        raise ValueError("cannot estimate covariances of an all-zero tensor")
    n_modes = x.ndim
    theta = (total / rank) ** (1.0 / n_modes)
    scale = rank * theta ** (n_modes - 1)
    diags = []
    for n in range(n_modes):
        unfolded = mode_unfold(x, n)
        k_diag = np.einsum("ij,ij->i", unfolded, unfolded)
        diags.append(np.maximum(k_diag / scale, COVARIANCE_FLOOR))
    return theta, diags


def precision_diags(cov_diags: Sequence[np.ndarray]) -> List[np.ndarray]:
    """``T_n = diag(R_n^-1)`` for diagonal covariances."""
    return [1.0 / np.asarray(d, dtype=float) for d in cov_diags]


def sample_prior_factor_entry(cov_ii: float, mu: float, rng: np.random.Generator) -> float:
    """Draw one entry from ``exp(-x²/(2 cov_ii) - mu |x|)`` by rejection.

    Proposals come from N(0, cov_ii) and are accepted with probability
    ``exp(-mu |x|)`` (always <= 1, so no envelope constant is needed).
    """
    if cov_ii <= 0:
        raise ValueError(f"variance must be positive, got {cov_ii}")
    sd = np.sqrt(cov_ii)
    while True:
        x = rng.normal(0.0, sd)
        if rng.uniform() < np.exp(-mu * abs(x)):
            return float(x)


def sample_prior_factor(
    cov_diag: np.ndarray, mu: float, n_columns: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorised ``sample_prior_factor_entry`` for a whole ``(I, R)`` factor.

    Row ``i`` uses variance ``cov_diag[i]``; rejected slots are redrawn in
    batches until every entry is accepted.
    """
    cov_diag = np.asarray(cov_diag, dtype=float)
    sd = np.broadcast_to(np.sqrt(cov_diag)[:, None], (cov_diag.shape[0], n_columns)).ravel()
    out = np.zeros(sd.shape[0])
    pending = np.arange(sd.shape[0])
    while pending.size:
        x = rng.normal(0.0, sd[pending])
        accept = rng.uniform(size=pending.size) < np.exp(-mu * np.abs(x))
        out[pending[accept]] = x[accept]
        pending = pending[~accept]
    return out.reshape(cov_diag.shape[0], n_columns)


def default_simulation_covariances(shape: Sequence[int], rng: np.random.Generator) -> List[np.ndarray]:
    """Uniform covariance diagonals of the 3-way simulation scheme.

    Each mode has one dominant first entry; N != 3 is unsupported.
    """
    if len(shape) != 3:
        raise UnsupportedInputError(f"the simulation covariance scheme is 3-way only, got {len(shape)} modes")
    diags = []
    for size, (first, rest) in zip(shape, SIMULATION_COVARIANCE_RANGES):
        d = rng.uniform(rest[0], rest[1], size=int(size))
        d[0] = rng.uniform(first[0], first[1])
        diags.append(d)
    return diags


def generate_synthetic(
    shape: Sequence[int], rank: int, spec: PriorSpec, rng: np.random.Generator
) -> SyntheticInstance:
    """Generate a gated, noisy, partially observed rank-``rank`` tensor.

    Noise variance is ``Var(X) / 10^(snr_db/10)`` with ``Var(X)`` the
    population variance of the realised clean entries; each entry is then
    kept with probability ``1 - missing_fraction``.
    """
    shape = tuple(int(s) for s in shape)
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if len(spec.mode_cov_diags) != len(shape):
        raise ValueError(f"spec has {len(spec.mode_cov_diags)} covariance diagonals for a {len(shape)}-way shape")
    for n, (size, d) in enumerate(zip(shape, spec.mode_cov_diags)):
        if d.shape[0] != size:
            raise ValueError(f"covariance diagonal of mode {n} has length {d.shape[0]}, expected {size}")

    factors = []
    for d in spec.mode_cov_diags:
        a = sample_prior_factor(d, spec.mu, rank, rng)
        a[np.abs(a) < spec.gate] = 0.0
        factors.append(a)
    truth = FactorSet(tuple(factors))
    clean = cp_reconstruct(truth)

    sigma = 0.0
    noise = np.zeros(shape)
    if spec.snr_db is not None:
        sigma = float(np.sqrt(np.var(clean) / 10.0 ** (spec.snr_db / 10.0)))
        noise = rng.normal(0.0, sigma, size=shape)

    mask = (rng.uniform(size=shape) >= spec.missing_fraction).astype(float)
    logger.debug(
        "synthetic %s rank=%d zeros=%d sigma=%.3g observed=%d",
        shape, rank, sum(int(np.sum(a == 0)) for a in factors), sigma, int(mask.sum()),
    )
    return SyntheticInstance(
        truth=truth,
        clean=clean,
        observed=MaskedTensor(clean + noise, mask),
        noise_sigma=sigma,
        noise=noise,
    )
