"""Subsampled isometries: both sampling models, isotropy diagnostics, tails.

Randomness is counter-based: every trial derives its own generator from
(base_seed, trial_index) via numpy's SeedSequence, so serial and parallel
runs agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, DomainError, InvalidM
from .transforms import UnitaryOperator


def derive_rng(seed: int, *stream: int) -> np.random.Generator:
    """Stream-split generator: per-trial seed = SeedSequence((seed, *stream))."""
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(s) for s in stream)))


def spawn_seed(seed: int, *stream: int) -> int:
    """Derived integer seed for handing to sample_bernoulli/sample_fixed."""
    return int(derive_rng(seed, *stream).integers(2**63))


@dataclass(frozen=True)
class SubsampledIsometry:
    base: UnitaryOperator
    model: str  # "bernoulli" | "fixed"
    m: int
    indices: np.ndarray = field(repr=False)  # sorted realized row set J
    seed: int = 0

    @property
    def scale(self) -> float:
        return math.sqrt(self.base.n / self.m)

    @property
    def num_rows(self) -> int:
        return int(self.indices.size)


def sample_bernoulli(u: UnitaryOperator, m: int, seed: int) -> SubsampledIsometry:
    """Include each row independently with probability m/n; E|J| = m.

    Empty realizations are retained (not resampled).
    """
    n = u.n
    if m < 2 or m > n:
        raise InvalidM(f"need 2 <= m <= n, got m={m}, n={n}")
    rng = derive_rng(seed)
    mask = rng.random(n) < m / n
    indices = np.flatnonzero(mask)
    return SubsampledIsometry(base=u, model="bernoulli", m=m, indices=indices, seed=seed)


def sample_fixed(u: UnitaryOperator, m: int, seed: int) -> SubsampledIsometry:
    """First m elements of a uniform random permutation of [n]; |J| = m always."""
    n = u.n
    if m < 1 or m > n:
        raise InvalidM(f"need 1 <= m <= n, got m={m}, n={n}")
    rng = derive_rng(seed)
    indices = np.sort(rng.permutation(n)[:m])
    return SubsampledIsometry(base=u, model="fixed", m=m, indices=indices, seed=seed)


def apply(a: SubsampledIsometry, x: np.ndarray) -> np.ndarray:
    """(sqrt(n/m) * <U_j, x>)_{j in J}; length-|J| output."""
    x = np.asarray(x)
    if x.shape[0] != a.base.n:
        raise DimensionMismatch(f"operator dim {a.base.n}, vector dim {x.shape[0]}")
    rows = a.base.matrix[a.indices]
    return a.scale * (rows @ x)


def apply_adjoint(a: SubsampledIsometry, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y)
    if y.shape[0] != a.num_rows:
        raise DimensionMismatch(f"expected length {a.num_rows}, got {y.shape[0]}")
    rows = a.base.matrix[a.indices]
    return a.scale * (rows.conj().T @ y)


def isotropy_error(u: UnitaryOperator, m: int, trials: int, seed: int) -> float:
    """||mean_t A_t^* A_t - I||_F over fresh Bernoulli draws.

    A^*A = (n/m) sum_{j in J} U_j^* U_j, so trials only contribute inclusion
    counts per row index.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    n = u.n
    counts = np.zeros(n)
    for t in range(trials):
        rng = derive_rng(seed, t)
        counts[np.flatnonzero(rng.random(n) < m / n)] += 1.0
    # mean A*A - I = U* diag(w - 1) U with w the scaled inclusion frequencies;
    # subtracting in count space keeps the m = n case exactly zero.
    w = (n / m) / trials * counts
    deviation = (u.matrix.conj().T * (w - 1.0)) @ u.matrix
    return float(np.linalg.norm(deviation))


def cramer_chernoff_tail(t: float, m: int, r: float) -> float:
    """Closed-form bound exp(-m*(u*log(u) - u + 1)) with u := t/R, clamped to [0,1].

    R := n*||xi||_U^2 for the measured vector xi; informative only for t > R.
    """
    if t <= 1:
        raise DomainError("t must be > 1")
    if r <= 0:
        raise DomainError("R must be > 0")
    u = t / r
    exponent = -m * (u * math.log(u) - u + 1.0)
    return float(min(1.0, math.exp(min(exponent, 0.0))))


def bernstein_tail(gamma: float, tau_sq: float, k_bound: float, dim: int) -> float:
    """Matrix Bernstein tail 2n*exp(-(g^2/2)/(tau^2 + K*g/3)), clamped to [0,1]."""
    if gamma < 0 or tau_sq < 0:
        raise DomainError("gamma and tau_sq must be nonnegative")
    if k_bound <= 0:
        raise DomainError("K must be positive")
    denom = tau_sq + k_bound * gamma / 3.0
    if denom == 0.0:
        raw = 2.0 * dim  # gamma = 0 with zero variance: vacuous bound
    else:
        raw = 2.0 * dim * math.exp(-(gamma**2 / 2.0) / denom)
    return float(min(1.0, raw))
