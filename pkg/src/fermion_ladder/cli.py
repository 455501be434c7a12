"""Command-line entry point: ``fermion-ladder <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import figures
from . import fitting
from . import io
from . import nonmarkov as nm
from . import trajectory as tr
from .errors import LadderError

log = logging.getLogger("fermion_ladder")

SUBCOMMANDS = ("trajectory", "scan", "negativity", "blp", "d2", "fit", "reproduce-figure")


def _load(args) -> io.Config:
    cfg = io.parse_config(args.config)
    if args.seed is not None:
        cfg.run = cfg.run.with_(base_seed=args.seed)
    return cfg


def _stats_rows(names, vals):
    rows = []
    for k, name in enumerate(names):
        s = tr.ensemble_average(vals[:, k])
        rows.append({"observable": name, "mean": s.mean, "ci95_low": s.ci95_low,
                     "ci95_high": s.ci95_high, "n_traj": s.n})
    return rows


def _observables(cfg: io.Config, default: str):
    L = cfg.params.L
    sel = cfg.sections["observables"]
    obs = [tr.entropy_obs(L, l) for l in sel["entropy"]]
    obs += [tr.negativity_obs(L, l) for l in sel["negativity"]]
    obs += [tr.mutual_info_obs(L, l) for l in sel["mutual_info"]]
    if not obs:
        obs = [tr.negativity_obs(L, L // 2) if default == "negativity" else tr.entropy_obs(L, L // 2)]
    return obs


def cmd_trajectory(args, out: Path, manifest: io.RunManifest):
    cfg = _load(args)
    obs = _observables(cfg, "entropy")
    vals = tr.run_ensemble(cfg.params, cfg.run, obs, args.workers, out / "checkpoints")
    per_traj = [{"traj": i, **{o.name: float(vals[i, k]) for k, o in enumerate(obs)}} for i in range(len(vals))]
    return cfg, {"trajectories": per_traj, "summary": _stats_rows([o.name for o in obs], vals)}


def cmd_negativity(args, out, manifest):
    cfg = _load(args)
    L = cfg.params.L
    sizes = cfg.sections["observables"]["negativity"] or list(range(1, L // 2 + 1))
    obs = [tr.negativity_obs(L, l) for l in sizes]
    vals = tr.run_ensemble(cfg.params, cfg.run, obs, args.workers, out / "checkpoints")
    rows = []
    for k, l in enumerate(sizes):
        s = tr.ensemble_average(vals[:, k])
        rows.append({"l_A": l, "E": s.mean, "E_ci_low": s.ci95_low, "E_ci_high": s.ci95_high, "n_traj": s.n})
    return cfg, {"negativity": rows}


def cmd_scan(args, out, manifest):
    cfg = _load(args)
    scan = cfg.sections["scan"]
    t12 = scan["t12"] or [cfg.params.t12]
    t2 = scan["t2"] or [cfg.params.t2]
    rows = tr.scan_phase_diagram(t12, t2, cfg.params, cfg.run, scan["quantity"], args.workers, out / "checkpoints")
    return cfg, {"scan": rows}


def _distance_rows(series):
    return [{"pair_id": k, "t": t, "d": float(d)} for k, s in enumerate(series) for t, d in enumerate(s)]


def cmd_blp(args, out, manifest):
    cfg = _load(args)
    sec = cfg.sections["nonmarkov"]
    rng = np.random.default_rng(cfg.run.base_seed)
    res = nm.blp_measure(cfg.params, sec["n_pairs"], sec["t_max"], rng, sec["mode"])
    summary = [{"N": res.N, "N_norm": res.N_norm, "best_pair": res.best_pair,
                "best_pair_norm": res.best_pair_norm, "n_pairs": sec["n_pairs"], "t_max": sec["t_max"]}]
    return cfg, {"blp_summary": summary, "distances": _distance_rows(res.distances)}


def cmd_d2(args, out, manifest):
    cfg = _load(args)
    sec = cfg.sections["nonmarkov"]
    res = nm.quadratic_measure(cfg.params, sec["n_pairs"], sec["n_traj"], sec["t_max"], cfg.run.base_seed, sec["mode"])
    summary = [{"N": res.N, "best_pair": res.best_pair, "n_pairs": sec["n_pairs"],
                "n_traj": sec["n_traj"], "t_max": sec["t_max"]}]
    return cfg, {"d2_summary": summary, "distances": _distance_rows(res.series)}


def cmd_fit(args, out, manifest):
    """Fit a table with columns L, value[, ci_low, ci_high]."""
    cfg = _load(args)
    if args.input is None:
        raise LadderError("fit needs --input <table>")
    rows = io.read_results(args.input)
    L = [r["L"] for r in rows]
    y = [r["value"] for r in rows]
    sec = cfg.sections["fit"]
    w = None
    if sec["weighted"] and rows and "ci_low" in rows[0]:
        w = fitting.weights_from_ci([r["ci_low"] for r in rows], [r["ci_high"] for r in rows])
    fit_fn = fitting.fit_negativity_scaling if sec["model"] == "negativity_ansatz" else fitting.fit_entropy_scaling
    ranges = sec["ranges"] or [[min(L), max(L)]]
    out_rows = []
    for lo, hi in ranges:
        f = fit_fn(L, y, w, (lo, hi))
        lin, logc = fitting.compare_contributions(f)
        rc = fitting.residual_comparison(L, y, (lo, hi))
        out_rows.append({"model": f.model, "l_min": f.l_min, "l_max": f.l_max, "gamma": f.gamma, "c": f.c,
                         "beta": f.beta, "rss": f.rss, "weighted": str(f.weighted), "linear_term": lin,
                         "log_term": logc, "rss_linear_only": rc["rss_linear"], "rss_log_only": rc["rss_log"],
                         "signed_total_linear_only": rc["linear"]["signed_total"],
                         "signed_total_log_only": rc["log"]["signed_total"], "better_pure_model": rc["better"]})
    manifest.notes["input"] = {"path": str(args.input), "sha256": io.sha256_file(args.input)}
    return cfg, {"fits": out_rows}


def cmd_reproduce(args, out, manifest):
    if args.figure not in figures.FIGURES:
        raise LadderError(f"unknown figure {args.figure!r}; choose from {sorted(figures.FIGURES)}")
    seed = 0 if args.seed is None else args.seed
    tables, notes = figures.FIGURES[args.figure](seed=seed, scale=args.scale, workers=args.workers)
    manifest.notes.update(notes)
    manifest.notes["figure"] = args.figure
    manifest.notes["scale"] = args.scale
    return None, tables


HANDLERS = {
    "trajectory": cmd_trajectory, "scan": cmd_scan, "negativity": cmd_negativity,
    "blp": cmd_blp, "d2": cmd_d2, "fit": cmd_fit, "reproduce-figure": cmd_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fermion-ladder", description=__doc__)
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, help="YAML run configuration")
    ap.add_argument("--out", type=Path, required=True, help="fresh output directory")
    ap.add_argument("--seed", type=int, help="override the base seed")
    ap.add_argument("--workers", type=int, help=f"worker processes (default: ${tr.WORKERS_ENV} or 1)")
    ap.add_argument("--figure", help="figure id for reproduce-figure, e.g. fig2a")
    ap.add_argument("--scale", type=float, default=1.0, help="multiplier on trajectory and pair counts")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--input", type=Path, help="input table for the fit subcommand")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.subcommand != "reproduce-figure" and args.config is None:
            raise LadderError(f"{args.subcommand} needs --config")
        if args.subcommand == "reproduce-figure" and not args.figure:
            raise LadderError("reproduce-figure needs --figure")
        if args.scale <= 0:
            raise LadderError("--scale must be positive")
        out = io.prepare_out_dir(args.out)
        manifest = io.RunManifest(
            command=" ".join(str(a) for a in (argv if argv is not None else sys.argv[1:])),
            config={},
            seed_policy={"base_seed": args.seed, "trajectory_stream": "SeedSequence(base_seed, spawn_key=(index,))",
                         "bootstrap_seed": tr.BOOT_SEED, "n_boot": tr.N_BOOT},
        )
        cfg, tables = HANDLERS[args.subcommand](args, out, manifest)
        if cfg is not None:
            manifest.config = io.config_snapshot(cfg)
            manifest.seed_policy["base_seed"] = cfg.run.base_seed
        for stem, rows in tables.items():
            path = io.emit_results(rows, out / f"{stem}.{args.format}", args.format)
            manifest.add_output(path)
        manifest.write(out)
    except (LadderError, OSError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
