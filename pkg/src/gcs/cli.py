"""Command-line entry point: gcs {coherence, train, recover, phase, sweep,
rip, subspace-rip}.

Experiment configs are JSON files mirroring the harness config dataclasses;
desk-scale defaults ship in configs/. The env var GCS_DATA_DIR locates MNIST
IDX files for `train --data mnist`.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import coherence as coh
from . import gnn, harness, recovery, sampling, training, transforms
from .linops import load_matrix

PAPER_PHASE_M = list(range(40, 441, 20))
PAPER_SWEEP_M = [10, 15, 20, 25, 50, 100, 200, 250]


def resolve_unitary(spec: str, n: int) -> transforms.UnitaryOperator:
    if spec == "dft":
        return transforms.dft_operator(n)
    if spec == "dct":
        return transforms.dct2_operator(n)
    if spec.startswith("file:"):
        return transforms.explicit_operator(load_matrix(spec[len("file:"):]))
    raise SystemExit(f"unknown unitary {spec!r} (expected dft, dct, or file:<path>)")


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x]


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x]


def cmd_coherence(args) -> int:
    g = gnn.load_network(args.weights)
    u = resolve_unitary(args.unitary, g.ambient_dim)
    report = coh.coherence_report(g, u, args.mc_samples, args.seed)
    print(json.dumps(report.to_json(), indent=2))
    return 0


def cmd_train(args) -> int:
    if args.data == "synth":
        widths = _ints(args.arch)
        data = training.synth_dataset(
            widths[-1], args.synth_k, args.synth_count, sampling.spawn_seed(args.seed, 999)
        )
    elif args.data == "mnist":
        root = os.environ.get("GCS_DATA_DIR", ".")
        data = training.load_idx(
            os.path.join(root, "train-images-idx3-ubyte"),
            os.path.join(root, "train-labels-idx1-ubyte"),
        )
    elif args.data.startswith("idx:"):
        paths = args.data[len("idx:"):].split(",")
        data = training.load_idx(*paths)
    else:
        raise SystemExit(f"unknown data source {args.data!r}")
    widths = _ints(args.arch)
    d_op = resolve_unitary(args.unitary, widths[-1]) if args.regularized else None
    config = training.TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch,
        epochs=args.epochs,
        reg_weight=args.reg_weight,
        lam=getattr(args, "lambda"),
        seed=args.seed,
        d_op=d_op,
    )
    model = training.train_vae(data, widths, args.final, config, regularized=args.regularized)
    training.save_vae(model, args.out)
    gnn.save_network(model.decoder, args.out.replace(".json", "") + ".decoder.json")
    print(f"trained; final epoch loss {model.loss_trace[-1]:.6g}; saved to {args.out}")
    return 0


def cmd_recover(args) -> int:
    g = gnn.load_network(args.weights)
    u = resolve_unitary(args.unitary, g.ambient_dim)
    sampler = sampling.sample_fixed if args.model == "fixed" else sampling.sample_bernoulli
    a = sampler(u, args.m, sampling.spawn_seed(args.seed, 0))
    rng = sampling.derive_rng(args.seed, 1)
    z0 = rng.standard_normal(g.code_dim)
    x0 = gnn.forward(g, z0)
    b = sampling.apply(a, x0)
    if args.noise > 0:
        eta = args.noise * rng.standard_normal(b.shape[0])
        b = b + eta
    cfg = recovery.RecoveryConfig(
        learning_rate=args.lr,
        max_iters=args.max_iters,
        grad_tol=args.grad_tol,
        restarts=args.restarts,
        seed=sampling.spawn_seed(args.seed, 2),
    )
    res = recovery.recover(g, a, b, cfg, x0=x0)
    out = res.to_json()
    out["success"] = res.rre is not None and res.rre < recovery.SUCCESS_RRE
    print(json.dumps(out, indent=2))
    return 0


def _recovery_from_json(cfg_json: dict) -> recovery.RecoveryConfig:
    rc = cfg_json.get("recovery", {})
    return recovery.RecoveryConfig(
        learning_rate=rc.get("learning_rate", 0.1),
        max_iters=rc.get("max_iters", 5000),
        grad_tol=rc.get("grad_tol", 1e-7),
        restarts=rc.get("restarts", 1),
    )


def cmd_phase(args) -> int:
    with open(args.config) as f:
        cfg_json = json.load(f)
    inner = [load_matrix(p) for p in cfg_json["inner_weights"]]
    w_high = load_matrix(cfg_json["w_high"])
    w_low = load_matrix(cfg_json["w_low"])
    n = w_high.shape[0]
    u = resolve_unitary(cfg_json.get("unitary", "dct"), n)
    m_list = PAPER_PHASE_M if args.paper_scale else cfg_json["m_list"]
    trials = 20 if args.paper_scale else cfg_json.get("trials", 20)
    cfg = harness.PhaseConfig(
        inner_weights=inner,
        w_high=w_high,
        w_low=w_low,
        betas=cfg_json.get("betas", [0.0, 0.25, 0.5, 0.75, 1.0]),
        m_list=m_list,
        trials=trials,
        seed=args.seed,
        d_op=u,
        model=cfg_json.get("model", "fixed"),
        recovery=_recovery_from_json(cfg_json),
        threads=args.threads,
    )
    records = harness.run_phase_portrait(cfg)
    csv_path = os.path.join(args.out_dir, "phase.csv")
    harness.emit_csv(
        records, csv_path,
        columns=["beta", "coherence_heuristic", "m", "trial", "rre", "success", "seed"],
    )
    grid = harness.phase_success_grid(records, cfg.betas, cfg.m_list)
    cohs = sorted({(r["beta"], r["coherence_heuristic"]) for r in records})
    harness.emit_svg_heatmap(
        grid,
        os.path.join(args.out_dir, "phase.svg"),
        row_labels=[f"a={c:.3f}" for _, c in cohs],
        col_labels=[str(m) for m in cfg.m_list],
        title="success fraction (white = all trials recovered)",
    )
    print(f"wrote {csv_path}")
    return 0


def cmd_sweep(args) -> int:
    with open(args.config) as f:
        cfg_json = json.load(f)
    models = [(name, training.load_vae(path)) for name, path in cfg_json["models"].items()]
    n = models[0][1].decoder.ambient_dim
    u = resolve_unitary(cfg_json.get("unitary", "dct"), n)
    test_spec = cfg_json["test_data"]
    if test_spec["kind"] == "synth":
        data = training.synth_dataset(
            n, test_spec["k_true"], test_spec["count"], test_spec["seed"]
        )
        test_samples = data.samples
    else:
        test_samples = training.load_idx(test_spec["images"]).samples
    m_list = PAPER_SWEEP_M if args.paper_scale else cfg_json["m_list"]
    cfg = harness.SweepConfig(
        m_list=m_list,
        trials=cfg_json.get("trials", 10),
        seed=args.seed,
        d_op=u,
        model=cfg_json.get("model", "fixed"),
        recovery=_recovery_from_json(cfg_json),
        threads=args.threads,
    )
    records, summaries = harness.run_measurement_sweep(models, test_samples, cfg)
    harness.emit_csv(records, os.path.join(args.out_dir, "sweep.csv"),
                     columns=["model", "m", "trial", "rre", "seed"])
    harness.emit_csv(summaries, os.path.join(args.out_dir, "sweep_summary.csv"),
                     columns=["model", "m", "geo_mean_rre", "geo_sd_rre", "floored"])
    series = []
    for name, _ in models:
        pts = [(s["m"], s["geo_mean_rre"]) for s in summaries if s["model"] == name]
        series.append({"label": name, "x": [p[0] for p in pts], "y": [p[1] for p in pts]})
    harness.emit_svg_scatter(series, os.path.join(args.out_dir, "sweep.svg"), log_y=True,
                             title="geometric mean rre vs m (log-y)")
    print(f"wrote {os.path.join(args.out_dir, 'sweep.csv')}")
    return 0


def cmd_rip(args) -> int:
    g = gnn.load_network(args.weights)
    u = resolve_unitary(args.unitary, g.ambient_dim)
    records, summaries = harness.run_rip_check(
        g, u, _ints(args.m_list), args.delta, args.chord_samples, args.trials,
        args.seed, model=args.model, threads=args.threads,
    )
    harness.emit_csv(records, os.path.join(args.out_dir, "rip.csv"),
                     columns=["m", "trial", "deviation", "exceed", "seed"])
    harness.emit_csv(summaries, os.path.join(args.out_dir, "rip_summary.csv"),
                     columns=["m", "exceed_freq", "trials"])
    print(f"wrote {os.path.join(args.out_dir, 'rip.csv')}")
    return 0


def cmd_subspace_rip(args) -> int:
    u = resolve_unitary(args.unitary, args.n)
    records, summaries, fit = harness.run_subspace_rip(
        u, args.k, _ints(args.m_list), args.delta, args.trials, args.seed,
        threads=args.threads,
    )
    harness.emit_csv(records, os.path.join(args.out_dir, "subspace_rip.csv"),
                     columns=["m", "trial", "deviation", "exceed", "seed"])
    harness.emit_csv(summaries, os.path.join(args.out_dir, "subspace_rip_summary.csv"),
                     columns=["m", "exceed_freq", "trials", "bound"])
    print(json.dumps(fit, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gcs", description=__doc__)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--paper-scale", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("coherence", help="coherence report for a weight file")
    c.add_argument("--weights", required=True)
    c.add_argument("--unitary", default="dct")
    c.add_argument("--mc-samples", type=int, default=10000)
    c.set_defaults(fn=cmd_coherence)

    t = sub.add_parser("train", help="train a small VAE")
    t.add_argument("--data", default="synth", help="synth | mnist | idx:<images>[,<labels>]")
    t.add_argument("--arch", required=True, help="comma widths, e.g. 8,32,64")
    t.add_argument("--final", default="none", choices=["none", "sigmoid"])
    t.add_argument("--regularized", action="store_true")
    t.add_argument("--reg-weight", type=float, default=1e4)
    t.add_argument("--lambda", type=float, default=1.0)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--batch", type=int, default=64)
    t.add_argument("--epochs", type=int, default=10)
    t.add_argument("--unitary", default="dct")
    t.add_argument("--synth-count", dest="synth_count", type=int, default=2000)
    t.add_argument("--synth-k", dest="synth_k", type=int, default=4)
    t.add_argument("--out", required=True)
    t.set_defaults(fn=cmd_train)

    r = sub.add_parser("recover", help="recover a random in-range signal")
    r.add_argument("--weights", required=True)
    r.add_argument("--unitary", default="dct")
    r.add_argument("--model", default="fixed", choices=["fixed", "bernoulli"])
    r.add_argument("--m", type=int, required=True)
    r.add_argument("--noise", type=float, default=0.0)
    r.add_argument("--lr", type=float, default=0.1)
    r.add_argument("--max-iters", type=int, default=5000)
    r.add_argument("--grad-tol", type=float, default=1e-7)
    r.add_argument("--restarts", type=int, default=1)
    r.set_defaults(fn=cmd_recover)

    ph = sub.add_parser("phase", help="phase portrait over (coherence, m)")
    ph.add_argument("--config", required=True)
    ph.set_defaults(fn=cmd_phase)

    sw = sub.add_parser("sweep", help="measurement sweep over trained models")
    sw.add_argument("--config", required=True)
    sw.set_defaults(fn=cmd_sweep)

    ri = sub.add_parser("rip", help="Monte-Carlo RIP check over sampled chords")
    ri.add_argument("--weights", required=True)
    ri.add_argument("--unitary", default="dft")
    ri.add_argument("--m-list", required=True)
    ri.add_argument("--delta", type=float, default=0.5)
    ri.add_argument("--chord-samples", type=int, default=200)
    ri.add_argument("--trials", type=int, default=100)
    ri.add_argument("--model", default="bernoulli", choices=["fixed", "bernoulli"])
    ri.set_defaults(fn=cmd_rip)

    sr = sub.add_parser("subspace-rip", help="exact subspace RIP concentration")
    sr.add_argument("--unitary", default="dft")
    sr.add_argument("--n", type=int, required=True)
    sr.add_argument("--k", type=int, required=True)
    sr.add_argument("--m-list", required=True)
    sr.add_argument("--delta", type=float, default=0.4)
    sr.add_argument("--trials", type=int, default=300)
    sr.set_defaults(fn=cmd_subspace_rip)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
