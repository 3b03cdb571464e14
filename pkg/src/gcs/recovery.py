"""Latent-code recovery: Adam on 0.5*||A G(z) - b||^2, the rre metric, and the
recovery-bound audit.

The solver follows the experimental protocol: Adam with learning rate 0.1 for
up to 5000 iterations, stopping early when the gradient norm drops below 1e-7.
Recovery is declared successful when rre < 1e-5.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import DimensionMismatch, GcsError, ZeroSignal
from .gnn import GenerativeNetwork, forward, objective_value_grad
from .sampling import SubsampledIsometry, apply, derive_rng

SUCCESS_RRE = 1e-5


@dataclass(frozen=True)
class RecoveryConfig:
    learning_rate: float = 0.1
    max_iters: int = 5000
    grad_tol: float = 1e-7
    restarts: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.max_iters < 1 or self.grad_tol <= 0 or self.restarts < 1:
            raise ValueError("all RecoveryConfig fields must be positive")


@dataclass(frozen=True)
class RecoveryResult:
    z_hat: np.ndarray = field(repr=False)
    x_hat: np.ndarray = field(repr=False)
    rre: float | None
    iterations: int
    termination: str  # "grad_tol" | "max_iters"
    residual: float
    failed_restarts: int = 0

    def to_json(self) -> dict:
        d = asdict(self)
        d["z_hat"] = self.z_hat.tolist()
        d["x_hat"] = self.x_hat.tolist()
        return d


def rre(x0: np.ndarray, x_hat: np.ndarray) -> float:
    """Relative reconstruction error ||x0 - x_hat||_2 / ||x0||_2."""
    x0 = np.asarray(x0, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x0.shape != x_hat.shape:
        raise DimensionMismatch("signals must share a shape")
    denom = float(np.linalg.norm(x0))
    if denom == 0.0:
        raise ZeroSignal("rre undefined for a zero reference signal")
    return float(np.linalg.norm(x0 - x_hat)) / denom


def _adam_solve(g, a, b, z0, config):
    lr, b1, b2, eps = config.learning_rate, 0.9, 0.999, 1e-8
    z = z0.copy()
    m = np.zeros_like(z)
    v = np.zeros_like(z)
    termination = "max_iters"
    it = 0
    for it in range(1, config.max_iters + 1):
        value, grad = objective_value_grad(g, a, b, z)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise FloatingPointError("nonfinite objective")
        if np.linalg.norm(grad) <= config.grad_tol:
            termination = "grad_tol"
            break
        m = b1 * m + (1 - b1) * grad
        v = b2 * v + (1 - b2) * grad**2
        m_hat = m / (1 - b1**it)
        v_hat = v / (1 - b2**it)
        z = z - lr * m_hat / (np.sqrt(v_hat) + eps)
    return z, it, termination


def recover(
    g: GenerativeNetwork,
    a: SubsampledIsometry,
    b: np.ndarray,
    config: RecoveryConfig = RecoveryConfig(),
    x0: np.ndarray | None = None,
) -> RecoveryResult:
    """Solve min_z ||A G(z) - b||_2 by Adam from standard-Gaussian restarts.

    The best restart by (recomputed) residual wins. When the true signal x0 is
    supplied, the result carries the rre against it (None when ||x0|| = 0).
    """
    b = np.asarray(b)
    if b.shape[0] != a.num_rows:
        raise DimensionMismatch(f"measurement length {b.shape[0]} != |J| = {a.num_rows}")
    best = None
    failed = 0
    for restart in range(config.restarts):
        rng = derive_rng(config.seed, restart)
        z0 = rng.standard_normal(g.code_dim)
        try:
            z, iters, termination = _adam_solve(g, a, b, z0, config)
        except FloatingPointError:
            failed += 1
            continue
        x = forward(g, z)
        residual = float(np.linalg.norm(apply(a, x) - b))
        if best is None or residual < best[3]:
            best = (z, x, iters, residual, termination)
    if best is None:
        raise GcsError(f"all {config.restarts} restarts hit a nonfinite objective")
    z, x, iters, residual, termination = best
    err = None
    if x0 is not None and np.linalg.norm(x0) > 0:
        err = rre(x0, x)
    return RecoveryResult(
        z_hat=z,
        x_hat=x,
        rre=err,
        iterations=iters,
        termination=termination,
        residual=residual,
        failed_restarts=failed,
    )


@dataclass(frozen=True)
class BoundAudit:
    left: float
    right: float
    satisfied: bool
    x_perp_norm: float
    a_x_perp_norm: float
    eta_norm: float
    eps_hat: float


def recovery_bound_audit(
    result: RecoveryResult,
    x0: np.ndarray,
    eta: np.ndarray,
    a: SubsampledIsometry,
    eps_hat: float,
    x_perp: np.ndarray | None = None,
) -> BoundAudit:
    """Evaluate ||x_hat - x0|| <= ||x_perp|| + 3||A x_perp|| + 3||eta|| + (3/2)eps_hat.

    The caller supplies x_perp (exact projection onto range(G) is intractable);
    omit it for in-range signals, where it is zero.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != result.x_hat.shape:
        raise DimensionMismatch("x0 shape mismatch")
    if x_perp is None:
        x_perp = np.zeros_like(x0)
    x_perp = np.asarray(x_perp, dtype=float)
    if x_perp.shape != x0.shape:
        raise DimensionMismatch("x_perp shape mismatch")
    xp = float(np.linalg.norm(x_perp))
    axp = float(np.linalg.norm(apply(a, x_perp)))
    en = float(np.linalg.norm(np.asarray(eta)))
    left = float(np.linalg.norm(result.x_hat - x0))
    right = xp + 3.0 * axp + 3.0 * en + 1.5 * eps_hat
    return BoundAudit(
        left=left,
        right=right,
        satisfied=left <= right,
        x_perp_norm=xp,
        a_x_perp_norm=axp,
        eta_norm=en,
        eps_hat=eps_hat,
    )
