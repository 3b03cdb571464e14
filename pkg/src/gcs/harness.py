"""Experiment harness: phase portrait, measurement sweep, RIP checks, and
CSV/SVG emission.

Every trial derives its own RNG stream from (seed, grid indices, trial), so
output is byte-identical regardless of worker count. Experiments default to
the fixed-permutation sampling model; RIP checks default to Bernoulli.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coherence import network_coherence_heuristic, subspace_coherence
from .errors import DimensionMismatch, DomainError, Unsupported
from .gnn import GenerativeNetwork, forward
from .recovery import SUCCESS_RRE, RecoveryConfig, recover
from .sampling import apply, derive_rng, sample_bernoulli, sample_fixed, spawn_seed
from .training import VaeModel
from .transforms import UnitaryOperator

RRE_FLOOR = 1e-16


def run_indexed(fn, count: int, threads: int = 1) -> list:
    """Apply fn to 0..count-1, aggregated in index order (thread-count invariant)."""
    if threads <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(count)))


def geometric_stats(values) -> tuple[float, float, int]:
    """Geometric mean and geometric SD; zeros floored at RRE_FLOOR.

    Returns (gmean, gsd, floored_count); gsd is exp(std(log values)).
    """
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise DomainError("no values")
    floored = int(np.count_nonzero(vals < RRE_FLOOR))
    logs = np.log(np.maximum(vals, RRE_FLOOR))
    return float(np.exp(np.mean(logs))), float(np.exp(np.std(logs))), floored


def _format_value(v) -> str:
    if isinstance(v, bool) or isinstance(v, np.bool_):
        return "1" if v else "0"
    if isinstance(v, float) or isinstance(v, np.floating):
        return repr(float(v))
    return str(v)


def emit_csv(records: list[dict], path: str, columns: list[str] | None = None) -> None:
    """Write records with a header row and stable column order; empty input errors."""
    if not records:
        raise OSError("refusing to write an empty CSV")
    if columns is None:
        columns = list(records[0].keys())
    lines = [",".join(columns)]
    for rec in records:
        lines.append(",".join(_format_value(rec[c]) for c in columns))
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")


def parse_csv(path: str) -> list[dict]:
    with open(path) as f:
        lines = [ln for ln in f.read().splitlines() if ln]
    header = lines[0].split(",")
    out = []
    for ln in lines[1:]:
        out.append(dict(zip(header, ln.split(","))))
    return out


# ---------------------------------------------------------------------------
# Phase portrait (coherence x measurements)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseConfig:
    inner_weights: list = field(repr=False)  # shared W^(1..d-1)
    w_high: np.ndarray = field(repr=False)  # high-coherence final layer
    w_low: np.ndarray = field(repr=False)  # low-coherence final layer
    betas: list = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    m_list: list = field(default_factory=lambda: [8, 16, 24, 32, 48, 64])
    trials: int = 20
    seed: int = 0
    d_op: UnitaryOperator | None = None
    model: str = "fixed"
    recovery: RecoveryConfig = RecoveryConfig()
    threads: int = 1

    def __post_init__(self):
        if self.w_high.shape != self.w_low.shape:
            raise DimensionMismatch("the two final layers must share a shape")
        if not self.betas or not self.m_list or self.trials < 1:
            raise DomainError("grids must be nonempty and trials >= 1")


def run_phase_portrait(cfg: PhaseConfig) -> list[dict]:
    """Per (beta, m) cell: interpolate final layers, measure, recover, record.

    W_beta := beta * w_high + (1 - beta) * w_low; success is rre < 1e-5.
    Records are ordered by (beta, m, trial) with columns
    beta, coherence_heuristic, m, trial, rre, success, seed.
    """
    u = cfg.d_op
    sampler = sample_fixed if cfg.model == "fixed" else sample_bernoulli
    jobs = []
    nets = {}
    for bi, beta in enumerate(cfg.betas):
        w_beta = beta * cfg.w_high + (1.0 - beta) * cfg.w_low
        net = GenerativeNetwork(weights=list(cfg.inner_weights) + [w_beta])
        coh = network_coherence_heuristic(net, u)
        nets[bi] = (net, coh)
        for mi, m in enumerate(cfg.m_list):
            for t in range(cfg.trials):
                jobs.append((bi, mi, t))

    def one(j):
        bi, mi, t = jobs[j]
        net, coh = nets[bi]
        m = cfg.m_list[mi]
        trial_seed = spawn_seed(cfg.seed, bi, mi, t)
        a = sampler(u, m, trial_seed)
        rng = derive_rng(cfg.seed, bi, mi, t, 1)
        z0 = rng.standard_normal(net.code_dim)
        x0 = forward(net, z0)
        b = apply(a, x0)
        res = recover(net, a, b, RecoveryConfig(
            learning_rate=cfg.recovery.learning_rate,
            max_iters=cfg.recovery.max_iters,
            grad_tol=cfg.recovery.grad_tol,
            restarts=cfg.recovery.restarts,
            seed=spawn_seed(cfg.seed, bi, mi, t, 2),
        ), x0=x0)
        err = res.rre if res.rre is not None else float("inf")
        return {
            "beta": cfg.betas[bi],
            "coherence_heuristic": coh,
            "m": m,
            "trial": t,
            "rre": err,
            "success": err < SUCCESS_RRE,
            "seed": trial_seed,
        }

    return run_indexed(one, len(jobs), cfg.threads)


def phase_success_grid(records: list[dict], betas, m_list) -> np.ndarray:
    """Success fractions indexed [beta, m]."""
    grid = np.zeros((len(betas), len(m_list)))
    counts = np.zeros_like(grid)
    bpos = {b: i for i, b in enumerate(betas)}
    mpos = {m: i for i, m in enumerate(m_list)}
    for r in records:
        i, j = bpos[r["beta"]], mpos[r["m"]]
        grid[i, j] += 1.0 if r["success"] else 0.0
        counts[i, j] += 1.0
    return grid / np.maximum(counts, 1.0)


# ---------------------------------------------------------------------------
# Measurement sweep over trained models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    m_list: list = field(default_factory=lambda: [10, 15, 20, 25, 50, 100, 200, 250])
    trials: int = 10
    seed: int = 0
    d_op: UnitaryOperator | None = None
    model: str = "fixed"
    recovery: RecoveryConfig = RecoveryConfig()
    threads: int = 1


def run_measurement_sweep(
    models: list[tuple[str, VaeModel]], test_samples: np.ndarray, cfg: SweepConfig
) -> tuple[list[dict], list[dict]]:
    """Per (model, m, trial): fresh A, target G(E(x_sharp)), recover, record rre.

    Returns (trial records, per-(model, m) geometric summaries).
    """
    u = cfg.d_op
    sampler = sample_fixed if cfg.model == "fixed" else sample_bernoulli
    jobs = []
    for gi, _ in enumerate(models):
        for mi, _ in enumerate(cfg.m_list):
            for t in range(cfg.trials):
                jobs.append((gi, mi, t))

    def one(j):
        gi, mi, t = jobs[j]
        name, model = models[gi]
        m = cfg.m_list[mi]
        # Target choice is shared across models: same x_sharp per (m, trial).
        rng = derive_rng(cfg.seed, mi, t)
        x_sharp = test_samples[int(rng.integers(test_samples.shape[0]))]
        mu, _ = model.encode(x_sharp)
        x0 = forward(model.decoder, mu)
        trial_seed = spawn_seed(cfg.seed, mi, t, 1)
        a = sampler(u, m, trial_seed)
        b = apply(a, x0)
        res = recover(model.decoder, a, b, RecoveryConfig(
            learning_rate=cfg.recovery.learning_rate,
            max_iters=cfg.recovery.max_iters,
            grad_tol=cfg.recovery.grad_tol,
            restarts=cfg.recovery.restarts,
            seed=spawn_seed(cfg.seed, gi, mi, t, 2),
        ), x0=x0)
        err = res.rre if res.rre is not None else float("inf")
        return {"model": name, "m": m, "trial": t, "rre": err, "seed": trial_seed}

    records = run_indexed(one, len(jobs), cfg.threads)
    summaries = []
    for name, _ in models:
        for m in cfg.m_list:
            vals = [r["rre"] for r in records if r["model"] == name and r["m"] == m]
            gmean, gsd, floored = geometric_stats(vals)
            summaries.append(
                {"model": name, "m": m, "geo_mean_rre": gmean, "geo_sd_rre": gsd, "floored": floored}
            )
    return records, summaries


# ---------------------------------------------------------------------------
# RIP checks
# ---------------------------------------------------------------------------


def run_rip_check(
    g: GenerativeNetwork,
    u: UnitaryOperator,
    m_list: list[int],
    delta: float,
    chord_samples: int,
    trials: int,
    seed: int,
    model: str = "bernoulli",
    threads: int = 1,
) -> tuple[list[dict], list[dict]]:
    """Empirical restricted isometry over sampled chords of range(G).

    Per (m, trial): sample A, record max over normalized chords of
    | ||Ax||_2 - 1 | and whether it exceeds delta.
    """
    if g.final_activation == "sigmoid":
        raise Unsupported("RIP check needs a linear-final network")
    if g.biases is not None:
        raise Unsupported("RIP check needs a bias-free network")
    sampler = sample_bernoulli if model == "bernoulli" else sample_fixed
    jobs = [(mi, t) for mi in range(len(m_list)) for t in range(trials)]
    k = g.code_dim

    def one(j):
        mi, t = jobs[j]
        m = m_list[mi]
        trial_seed = spawn_seed(seed, mi, t)
        a = sampler(u, m, trial_seed)
        rng = derive_rng(seed, mi, t, 1)
        z1 = rng.standard_normal((k, chord_samples))
        z2 = rng.standard_normal((k, chord_samples))
        chords = forward(g, z1) - forward(g, z2)
        norms = np.linalg.norm(chords, axis=0)
        ok = norms > 1e-10
        if not np.any(ok):
            dev = 0.0
        else:
            unit = chords[:, ok] / norms[ok]
            rows = u.matrix[a.indices]
            ax = a.scale * (rows @ unit)
            dev = float(np.max(np.abs(np.linalg.norm(ax, axis=0) - 1.0)))
        return {"m": m, "trial": t, "deviation": dev, "exceed": dev >= delta, "seed": trial_seed}

    records = run_indexed(one, len(jobs), threads)
    summaries = []
    for m in m_list:
        exc = [r["exceed"] for r in records if r["m"] == m]
        summaries.append({"m": m, "exceed_freq": float(np.mean(exc)), "trials": len(exc)})
    return records, summaries


def run_subspace_rip(
    u: UnitaryOperator,
    k: int,
    m_list: list[int],
    delta: float,
    trials: int,
    seed: int,
    threads: int = 1,
) -> tuple[list[dict], list[dict], dict]:
    """Exact subspace RIP simulation against the incoherent-subspace tail.

    Fixes one seeded random k-dim subspace, computes its exact coherence, then
    per (m, trial) draws a Bernoulli subsample and evaluates the deviation
    ||(n/m) * B_J^* B_J - I_k|| exactly (B = U Q in subspace coordinates).

    Returns (records, per-m summaries, fit) where fit carries the fitted
    constant of 2k*exp(-c*delta^2*m/(alpha^2*n)) and the log-linear R^2.
    """
    n = u.n
    if k < 1 or k > n:
        raise DomainError(f"need 1 <= k <= n, got k={k}")
    rng = derive_rng(seed, 0)
    q = np.linalg.qr(rng.standard_normal((n, k)), mode="reduced")[0]
    alpha = subspace_coherence(u, q)
    b_mat = u.matrix @ q
    jobs = [(mi, t) for mi in range(len(m_list)) for t in range(trials)]

    def one(j):
        mi, t = jobs[j]
        m = m_list[mi]
        trial_rng = derive_rng(seed, 1, mi, t)
        mask = trial_rng.random(n) < m / n
        bj = b_mat[mask]
        # The subspace is real, so the sup runs over real unit v: only the
        # real (symmetric) part of the Gram matrix enters the quadratic form.
        gram = (n / m) * np.real(bj.conj().T @ bj)
        dev = float(np.max(np.abs(np.linalg.eigvalsh(gram - np.eye(k)))))
        return {"m": m, "trial": t, "deviation": dev, "exceed": dev >= delta, "seed": seed}

    records = run_indexed(one, len(jobs), threads)
    summaries = []
    for m in m_list:
        exc = [r["exceed"] for r in records if r["m"] == m]
        summaries.append({"m": m, "exceed_freq": float(np.mean(exc)), "trials": len(exc)})
    fit = fit_subspace_tail(summaries, k, n, alpha, delta)
    fit["alpha"] = alpha
    for s in summaries:
        s["bound"] = min(
            1.0, 2 * k * math.exp(-fit["c"] * delta**2 * s["m"] / (alpha**2 * n))
        )
    return records, summaries, fit


def fit_subspace_tail(summaries, k, n, alpha, delta) -> dict:
    """Fit c in 2k*exp(-c*delta^2*m/(alpha^2*n)) so the bound dominates the
    empirical frequencies, and report the log-linear regression R^2."""
    ms, freqs = [], []
    for s in summaries:
        if s["exceed_freq"] > 0:
            ms.append(s["m"])
            freqs.append(s["exceed_freq"])
    if len(ms) < 2:
        return {"c": 0.0, "r_squared": float("nan"), "slope": float("nan")}
    ms_arr = np.asarray(ms, dtype=float)
    logs = np.log(np.asarray(freqs))
    slope, intercept = np.polyfit(ms_arr, logs, 1)
    pred = slope * ms_arr + intercept
    ss_res = float(np.sum((logs - pred) ** 2))
    ss_tot = float(np.sum((logs - np.mean(logs)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    # Largest c keeping the bound above every observed frequency.
    cs = [(math.log(2 * k) - lf) * alpha**2 * n / (delta**2 * m) for m, lf in zip(ms, logs)]
    return {"c": max(0.0, min(cs)), "r_squared": r2, "slope": float(slope)}


# ---------------------------------------------------------------------------
# SVG rendering
# ---------------------------------------------------------------------------


def emit_svg_heatmap(grid: np.ndarray, path: str, row_labels=None, col_labels=None,
                     cell: int = 40, title: str = "") -> None:
    """Static heatmap; value 1 renders white, 0 black."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise OSError("refusing to render an empty heatmap")
    rows, cols = grid.shape
    margin = 70
    w, h = margin + cols * cell + 20, margin + rows * cell + 20
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">']
    if title:
        parts.append(f'<text x="{margin}" y="20" font-size="14">{title}</text>')
    for i in range(rows):
        for j in range(cols):
            shade = int(round(255 * min(1.0, max(0.0, grid[i, j]))))
            color = f"rgb({shade},{shade},{shade})"
            x, y = margin + j * cell, margin + i * cell
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{color}" stroke="gray"/>'
            )
    if row_labels is not None:
        for i, lab in enumerate(row_labels):
            y = margin + i * cell + cell // 2
            parts.append(f'<text x="5" y="{y}" font-size="11">{lab}</text>')
    if col_labels is not None:
        for j, lab in enumerate(col_labels):
            x = margin + j * cell + cell // 4
            parts.append(f'<text x="{x}" y="{margin - 8}" font-size="11">{lab}</text>')
    parts.append("</svg>")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        f.write("\n".join(parts))


def emit_svg_scatter(series: list[dict], path: str, log_y: bool = False,
                     width: int = 560, height: int = 400, title: str = "") -> None:
    """Scatter/line plot; each series is {"label", "x": [...], "y": [...]}."""
    if not series:
        raise OSError("refusing to render an empty plot")
    margin = 60
    all_x = np.concatenate([np.asarray(s["x"], dtype=float) for s in series])
    all_y = np.concatenate([np.asarray(s["y"], dtype=float) for s in series])
    if log_y:
        all_y = np.log10(np.maximum(all_y, RRE_FLOOR))
    x_lo, x_hi = float(all_x.min()), float(all_x.max())
    y_lo, y_hi = float(all_y.min()), float(all_y.max())
    x_span = x_hi - x_lo or 1.0
    y_span = y_hi - y_lo or 1.0

    def sx(x):
        return margin + (x - x_lo) / x_span * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - y_lo) / y_span * (height - 2 * margin)

    colors = ["black", "steelblue", "firebrick", "seagreen", "darkorange"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">']
    if title:
        parts.append(f'<text x="{margin}" y="20" font-size="14">{title}</text>')
    parts.append(
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>'
    )
    parts.append(
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>'
    )
    for si, s in enumerate(series):
        color = colors[si % len(colors)]
        xs = np.asarray(s["x"], dtype=float)
        ys = np.asarray(s["y"], dtype=float)
        if log_y:
            ys = np.log10(np.maximum(ys, RRE_FLOOR))
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}"/>')
        for x, y in zip(xs, ys):
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>')
        parts.append(
            f'<text x="{width - margin + 4}" y="{margin + 16 * si}" font-size="11" '
            f'fill="{color}">{s.get("label", f"series {si}")}</text>'
        )
    parts.append("</svg>")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        f.write("\n".join(parts))
