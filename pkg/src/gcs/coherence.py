"""Coherence: exact subspace values, the QR final-layer heuristic, Monte-Carlo
chord estimates, the training regularizer, and sample-complexity formulas.

Coherence of a set T w.r.t. a unitary U is sup over unit x in T of ||Ux||_inf.
For a subspace spanned by orthonormal Q it equals ||U Q||_{2->inf} exactly; for
a ReLU network the final-layer heuristic ||D Q1||_{2->inf} (Q1 from the thin QR
of W^(d)) upper-bounds the coherence of the expanded chord set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import (
    DegenerateRange,
    DimensionMismatch,
    DomainError,
    NotOrthonormal,
    Unsupported,
)
from .gnn import GenerativeNetwork, forward
from .linops import orthonormality_defect, qr_thin, two_to_inf_norm
from .sampling import derive_rng
from .transforms import UnitaryOperator


@dataclass(frozen=True)
class CoherenceReport:
    alpha_heuristic: float
    alpha_mc: float
    mc_samples: int
    lower_bound: float
    typical_bound: float | None
    seed: int
    heuristic_guarantee: bool  # False when the final layer has a sigmoid
    constant_c: float = 1.0

    def to_json(self) -> dict:
        return asdict(self)


def subspace_coherence(u: UnitaryOperator, q: np.ndarray) -> float:
    """Exact coherence of range(Q): ||U Q||_{2->inf} for orthonormal Q."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != u.n:
        raise DimensionMismatch(f"Q must be {u.n} x k")
    if orthonormality_defect(q) > 1e-8:
        raise NotOrthonormal("columns of Q are not orthonormal to 1e-8")
    return two_to_inf_norm(u.matrix @ q)


def network_coherence_heuristic(
    g: GenerativeNetwork, d_op: UnitaryOperator, allow_sigmoid: bool = False
) -> float:
    """||D Q1||_{2->inf} with Q1 spanning range(W^(d)).

    Upper-bounds the coherence of the expanded chord set for linear-final
    networks. With a sigmoid final layer the containment guarantee does not
    apply; pass allow_sigmoid=True to compute it as a diagnostic anyway.
    """
    if g.final_activation == "sigmoid" and not allow_sigmoid:
        raise Unsupported("heuristic guarantee needs a linear final layer; pass allow_sigmoid=True")
    w = g.weights[-1]
    if w.shape[0] != d_op.n:
        raise DimensionMismatch(f"final layer rows {w.shape[0]} != operator dim {d_op.n}")
    factors = qr_thin(w)
    return two_to_inf_norm(d_op.matrix @ factors.q)


def chord_coherence_mc(
    g: GenerativeNetwork, u: UnitaryOperator, samples: int, seed: int, chunk: int = 8192
) -> float:
    """Monte-Carlo lower bound on the coherence of range(G) - range(G).

    Latent pairs are standard Gaussian; chords below norm 1e-10 are skipped.
    """
    if samples < 1:
        raise DomainError("samples must be >= 1")
    if g.ambient_dim != u.n:
        raise DimensionMismatch(f"network output dim {g.ambient_dim} != operator dim {u.n}")
    rng = derive_rng(seed)
    k = g.code_dim
    best = 0.0
    kept = 0
    done = 0
    while done < samples:
        batch = min(chunk, samples - done)
        z1 = rng.standard_normal((k, batch))
        z2 = rng.standard_normal((k, batch))
        chords = forward(g, z1) - forward(g, z2)
        norms = np.linalg.norm(chords, axis=0)
        ok = norms > 1e-10
        if np.any(ok):
            unit = chords[:, ok] / norms[ok]
            vals = np.max(np.abs(u.matrix @ unit), axis=0)
            best = max(best, float(np.max(vals)))
            kept += int(np.count_nonzero(ok))
        done += batch
    if kept == 0:
        raise DegenerateRange("all sampled chords were below norm tolerance")
    return best


def coherence_lower_bound(k: int, n: int) -> float:
    """sqrt(k/n): no k-dim subspace of an n-dim space does better."""
    if k < 1 or k > n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    return math.sqrt(k / n)


def typical_coherence_bound(k: int, d: int, widths: list[int], n: int, gamma: float = 0.0) -> float:
    """Gaussian-last-layer coherence scale (up to an absolute constant):

    sqrt(k/n) + sqrt(log(n)/n) + sqrt((k/n)*sum log(2e*k_i/k)) + gamma/sqrt(n)
    """
    if gamma < 0:
        raise DomainError("gamma must be >= 0")
    if len(widths) != d + 1 or widths[0] != k or widths[-1] != n:
        raise DimensionMismatch("widths must be [k, k_1, ..., k_{d-1}, n]")
    inner = widths[1:-1]
    log_sum = sum(math.log(2 * math.e * ki / k) for ki in inner)
    return (
        math.sqrt(k / n)
        + math.sqrt(math.log(n) / n)
        + math.sqrt((k / n) * log_sum)
        + gamma / math.sqrt(n)
    )


def regularizer(w: np.ndarray, d_op: UnitaryOperator, lam: float) -> tuple[float, np.ndarray]:
    """rho(W) = ||D W||_{2->inf} + lam*||W^T W - I||_F, with a subgradient.

    The 2->inf term differentiates through the maximizing row (smallest index
    on ties); the Frobenius term's gradient is zeroed below 1e-12.
    """
    w = np.asarray(w, dtype=float)
    if lam < 0:
        raise DomainError("lambda must be >= 0")
    if w.ndim != 2 or w.shape[0] != d_op.n:
        raise DimensionMismatch(f"W must have {d_op.n} rows")
    dw = d_op.matrix @ w
    row_norms = np.sqrt(np.sum(np.abs(dw) ** 2, axis=1))
    i_star = int(np.argmax(row_norms))  # argmax takes the first maximizer
    value = float(row_norms[i_star])
    grad = np.zeros_like(w)
    if row_norms[i_star] > 0:
        t = dw[i_star]
        d_row = d_op.matrix[i_star]
        grad += np.real(np.outer(d_row, np.conj(t))) / row_norms[i_star]
    k = w.shape[1]
    e = w.T @ w - np.eye(k)
    fro = float(np.linalg.norm(e))
    value += lam * fro
    if fro > 1e-12:
        grad += 2.0 * lam * (w @ e) / fro
    return value, grad


_KIND_PARAMS = {"RIP": (1.0, 2.0), "DiffRIP": (2.0, 4.0), "GCS": (2.0, 4.0)}


def sample_complexity(
    alpha: float,
    n: int,
    k: int,
    widths: list[int],
    epsilon: float,
    delta: float,
    kind: str = "RIP",
    c: float = 1.0,
) -> float:
    """m >= c*(alpha^2*n/delta^2)*(factor*k*sum log(2e*k_i/k) + log(mult*k/eps)).

    (factor, mult) is (1, 2) for RIP and (2, 4) for DiffRIP/GCS; GCS fixes
    delta = 1/3 per the recovery theorem's proof.
    """
    if kind not in _KIND_PARAMS:
        raise DomainError(f"unknown kind {kind!r}")
    if alpha <= 0 or n < 1 or k < 1 or epsilon <= 0 or delta <= 0 or c <= 0:
        raise DomainError("all parameters must be positive")
    factor, mult = _KIND_PARAMS[kind]
    if kind == "GCS":
        delta = 1.0 / 3.0
    inner = widths[1:-1]
    log_sum = sum(math.log(2 * math.e * ki / k) for ki in inner)
    return c * (alpha**2 * n / delta**2) * (factor * k * log_sum + math.log(mult * k / epsilon))


def coherence_report(
    g: GenerativeNetwork,
    d_op: UnitaryOperator,
    mc_samples: int,
    seed: int,
    gamma: float = 0.0,
) -> CoherenceReport:
    """Assemble the standard report: heuristic, MC chord estimate, and bounds."""
    sigmoid_final = g.final_activation == "sigmoid"
    alpha_h = network_coherence_heuristic(g, d_op, allow_sigmoid=True)
    alpha_mc = chord_coherence_mc(g, d_op, mc_samples, seed)
    return CoherenceReport(
        alpha_heuristic=alpha_h,
        alpha_mc=alpha_mc,
        mc_samples=mc_samples,
        lower_bound=coherence_lower_bound(g.code_dim, d_op.n),
        typical_bound=typical_coherence_bound(
            g.code_dim, g.depth, g.widths, g.ambient_dim, gamma
        ),
        seed=seed,
        heuristic_guarantee=not sigmoid_final,
    )
