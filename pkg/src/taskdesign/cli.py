"""Command-line entry point: ``taskdesign {simulate,replay,grid,importance,curves}``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics as M
from .discretize import LinearEmbedding, assign_bins, bin_counts, fit_grid
from .environments import PoolExhausted, SyntheticEnvironment, SyntheticSpec, read_embedding, read_table
from .experiment import ExperimentConfig, default_workers, emit, run_experiment, summarize
from .importance import is_ate_variance, optimal_proposal, rct_proposal


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _csv_strs(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--workers", type=int, help="worker processes (default: available cores)")
    p.add_argument("--sizes", type=_csv_ints, help="sample sizes, e.g. 100,300,1000")
    p.add_argument("--trials", type=int, help="trials per sampler")
    p.add_argument("--batch", type=int, help="design batch size")
    p.add_argument("--samplers", type=_csv_strs, help="e.g. auq,ate,mse,rct,uniform-latent")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taskdesign", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="experiments on the synthetic population")
    _experiment_args(sim)
    sim.add_argument("--uplift", choices=["u1", "u2"], help="synthetic uplift shape")

    rep = sub.add_parser("replay", help="experiments replaying a pooled RCT")
    _experiment_args(rep)
    rep.add_argument("--pool", help="pool table with treatment and outcome columns")
    rep.add_argument("--embedding", help="per-row embedding table")
    rep.add_argument("--test-pool", help="separate test table; default is a seeded split")

    grid = sub.add_parser("grid", help="fit a grid and dump bin densities")
    grid.add_argument("--pool", help="pool table (embedded linearly unless --embedding is given)")
    grid.add_argument("--embedding", help="embedding table")
    grid.add_argument("--synthetic", choices=["u1", "u2"], help="use the synthetic population")
    grid.add_argument("--cells", type=int, default=20)
    grid.add_argument("--latent-dim", type=int, default=2)
    grid.add_argument("--out", default="grid", help="output directory")

    imp = sub.add_parser("importance", help="importance-sampling ATE variance calculator")
    imp.add_argument("--table", help="table with columns density,m2_control,m2_treated")
    imp.add_argument("--synthetic", choices=["u1", "u2"], default="u1")
    imp.add_argument("--cells", type=int, default=20)
    imp.add_argument("--n", type=int, default=1000, help="sample size")
    imp.add_argument("--out", help="write the optimal proposal here")

    cur = sub.add_parser("curves", help="Qini curve and AUQ for a saved model")
    cur.add_argument("--model", required=True, help="model JSON with 'uplift' and 'observed'")
    cur.add_argument("--test", required=True, help="test table with columns bin,treatment,outcome")
    cur.add_argument("--points", type=int, default=100)
    cur.add_argument("--out", help="curve output (f,q); default prints")
    return parser


def _config(args, environment: str) -> ExperimentConfig:
    base = ExperimentConfig.from_json(args.config).to_dict() if args.config else {}
    base["environment"] = environment
    overrides = {
        "seed": args.seed,
        "sizes": args.sizes,
        "trials": args.trials,
        "batch": args.batch,
        "samplers": args.samplers,
    }
    if environment == "synthetic":
        overrides["uplift"] = args.uplift
    else:
        overrides.update(pool=args.pool, embedding=args.embedding, test_pool=args.test_pool)
    base.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(base)


def cmd_experiment(args, environment: str) -> int:
    config = _config(args, environment)
    workers = args.workers if args.workers is not None else default_workers()
    rows = run_experiment(config, workers)
    paths = emit(rows, config, args.out)
    for s in summarize(rows):
        print(f"{s.sampler:>15} {s.metric:>12} n={s.size:<6} mean={s.mean:.6g} se={s.stderr:.3g}")
    print(f"wrote {paths['raw']}, {paths['summary']}, {paths['manifest']}")
    return 0


def cmd_grid(args) -> int:
    out = Path(args.out)
    if args.synthetic:
        env = SyntheticEnvironment(SyntheticSpec(uplift=args.synthetic), args.cells)
        grid, density = env.grid, env.density
    else:
        if args.embedding:
            emb = read_embedding(args.embedding)
        elif args.pool:
            header, data = read_table(args.pool)
            feat = [i for i, h in enumerate(header) if h not in ("treatment", "outcome")]
            if not feat:
                raise ValueError("pool has no feature columns")
            emb = LinearEmbedding(min(args.latent_dim, len(feat))).fit_transform(data[:, feat])
        else:
            raise ValueError("grid needs --pool, --embedding or --synthetic")
        grid = fit_grid(emb, args.cells)
        density = bin_counts(grid.n_bins, assign_bins(grid, emb)) / emb.shape[0]
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "grid.json", "w") as fh:
        json.dump(grid.to_dict(), fh, indent=2)
        fh.write("\n")
    with open(out / "density.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin", "density"])
        for b, p in enumerate(density):
            w.writerow([b, repr(float(p))])
    print(f"{grid.n_bins} bins, {int(np.count_nonzero(density))} populated; wrote {out}")
    return 0


def cmd_importance(args) -> int:
    if args.table:
        header, data = read_table(args.table)
        try:
            cols = [header.index(c) for c in ("density", "m2_control", "m2_treated")]
        except ValueError as exc:
            raise ValueError("table needs columns density,m2_control,m2_treated") from exc
        density, m2 = data[:, cols[0]], data[:, cols[1:]]
        ate = None
    else:
        env = SyntheticEnvironment(SyntheticSpec(uplift=args.synthetic), args.cells)
        density, m2 = env.density, env.theta
        ate = env.ate
    density = density / density.sum()
    if ate is None:
        # binary outcomes: second moment equals the mean
        ate = float(density @ (m2[:, 1] - m2[:, 0]))
    h_star = optimal_proposal(density, m2)
    v_rct = is_ate_variance(rct_proposal(density), density, m2, args.n, ate)
    v_opt = is_ate_variance(h_star, density, m2, args.n, ate)
    print(f"n={args.n} ate={ate:.6g} var_rct={v_rct:.6g} var_optimal={v_opt:.6g} ratio={v_opt / v_rct:.4f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin", "h_control", "h_treated"])
            for b, (h0, h1) in enumerate(h_star):
                w.writerow([b, repr(float(h0)), repr(float(h1))])
    return 0


def cmd_curves(args) -> int:
    with open(args.model) as fh:
        model = M.UpliftModel.from_dict(json.load(fh))
    header, data = read_table(args.test)
    try:
        bi, ti, yi = (header.index(c) for c in ("bin", "treatment", "outcome"))
    except ValueError as exc:
        raise ValueError("test table needs columns bin,treatment,outcome") from exc
    bins = data[:, bi].astype(np.int64)
    if bins.min() < 0 or bins.max() >= model.uplift.size:
        raise ValueError("test bins fall outside the model")
    test = M.TestSet(bins, data[:, ti], data[:, yi])
    curve = M.qini_curve(test, model, args.points)
    area = M.auq(curve, test.ate)
    lines = ["f,q"] + [f"{f!r},{q!r}" for f, q in curve.to_rows()]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
    print(f"auq={area:.6g}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_experiment(args, "synthetic")
        if args.command == "replay":
            return cmd_experiment(args, "replay")
        if args.command == "grid":
            return cmd_grid(args)
        if args.command == "importance":
            return cmd_importance(args)
        return cmd_curves(args)
    except (ValueError, OSError, PoolExhausted, ZeroDivisionError, json.JSONDecodeError) as exc:
        print(f"taskdesign {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
