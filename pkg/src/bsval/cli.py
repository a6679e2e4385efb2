"""Command-line experiment runner.

Every command writes a report directory with a ``manifest.json`` that lists
the files and embeds the fully resolved configuration. Outputs are a pure
function of (config, seed).
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import (
    ConfigError,
    Experiment,
    ExperimentConfig,
    bayes_sweep,
    bonafide_sweep,
    figure1,
    ksweep,
    structure_analysis,
    x_label,
)
from .linalg import haar_random_unitary, save_matrix, unitarity_residual
from .model import Law, NumericalInvariantError
from .samplers import McmcConfig, sample_exact, sample_mcmc

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

NOTES = [
    "Distributions are conditioned on the collision-free sector; input photons occupy the configured input modes "
    "(default 0..n-1).",
    "chi2 uses expected counts N_i N_j / N_total unless chi2_formula = 'verbatim-eq6' (expected counts N_i N_j / k, "
    "which does not conserve the table total).",
    "Each trial draws its events without replacement from the pool; the bona fide column is the training member "
    "counts of the cluster model.",
    "MCMC pools for different x_ind share one random stream (common random numbers).",
]


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"not JSON serialisable: {type(obj)}")


def write_curve(path: Path, values) -> None:
    write_csv(path, ["index", "value"], enumerate(np.asarray(values).tolist()))


class Report:
    def __init__(self, out: Path, command: str, config: ExperimentConfig):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config = config
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def finish(self, **extra) -> None:
        manifest = {
            "command": self.command,
            "version": __version__,
            "config": self.config.to_dict(),
            "files": sorted(set(self.files)),
            "notes": NOTES,
            **extra,
        }
        write_json(self.out / "manifest.json", manifest)


# -- commands -----------------------------------------------------------


def cmd_matrix(cfg: ExperimentConfig, args) -> int:
    rep = Report(args.out, "matrix", cfg)
    u = haar_random_unitary(cfg.m, cfg.sub_seed("matrix"))
    residual = unitarity_residual(u)
    save_matrix(u, rep.path("matrix.json"))
    print(f"unitarity residual {residual:.3e}")
    rep.finish(unitarity_residual=residual)
    return EXIT_OK


def cmd_table(cfg: ExperimentConfig, args) -> int:
    exp = Experiment(cfg)
    law = Law.parse(args.law)
    rep = Report(args.out, "table", cfg)
    tab = exp.table(law)
    tab.save(rep.path("table.csv"), rep.path("table.json"))
    print(f"{law.label}: {len(tab)} patterns, cfs_mass {tab.cfs_mass:.6f}, clamped {tab.clamp_count}")
    rep.finish(law=law.spec)
    return EXIT_OK


def cmd_sample(cfg: ExperimentConfig, args) -> int:
    exp = Experiment(cfg)
    law = Law.parse(args.law)
    rep = Report(args.out, "sample", cfg)
    tab = exp.table(law)
    count = args.count or cfg.pool_size
    if args.method == "exact":
        events = sample_exact(tab, count, cfg.sub_seed("exact"))
    else:
        events = sample_mcmc(tab, count, McmcConfig(cfg.burn_in, cfg.thinning, cfg.sub_seed("mcmc")))
    events.save(rep.path("events.csv"), rep.path("events.json"))
    print(f"{len(events)} {args.method} events from {law.label}")
    rep.finish(law=law.spec, method=args.method, count=count)
    return EXIT_OK


def cmd_clusters(cfg: ExperimentConfig, args) -> int:
    exp = Experiment(cfg)
    law = Law.parse(args.law or cfg.bona_fide)
    rep = Report(args.out, "clusters", cfg)
    model, events = exp.cluster_model(law)
    model.save(rep.path("clusters.json"))
    events.save(rep.path("bona_fide_events.csv"), rep.path("bona_fide_events.json"))
    write_curve(rep.path("cumulative_counts.csv"), model.cumulative_counts())
    print(f"k={model.k} fitted in {model.iterations_used} iterations on {len(events)} {law.label} events")
    rep.finish(law=law.spec)
    return EXIT_OK


def _write_bayes(rep: Report, bayes: dict, prefix: str = "") -> None:
    rows = bayes["rows"]
    write_csv(
        rep.path(f"{prefix}bayes_slopes.csv"),
        ["x_ind", "slope", "mean_summand", "expected_slope", "n_events", "skipped"],
        [[r["x_ind"], r["slope"], r["mean_summand"], r["expected_slope"], r["n_events"], r["skipped"]] for r in rows],
    )
    for key, trace in bayes["traces"].items():
        trace.save(rep.path(f"{prefix}lnx_x{key}.csv"), rep.path(f"{prefix}lnx_x{key}.json"), x_ind=float(key))


def cmd_figure1(cfg: ExperimentConfig, args) -> int:
    exp = Experiment(cfg)
    rep = Report(args.out, "figure1", cfg)
    res = figure1(exp)
    res["model"].save(rep.path("clusters.json"))
    for key, ens in res["ensembles"].items():
        ens.save(rep.path(f"chi2_x{key}.csv"), rep.path(f"chi2_x{key}.json"))
    write_csv(
        rep.path("centers.csv"),
        ["x_ind", "center", "fwhm", "center_stderr"],
        [[r["x_ind"], r["center"], r["fwhm"], r["center_stderr"]] for r in res["centers"]],
    )
    _write_bayes(rep, res["bayes"])
    summary = {
        "centers": res["centers"],
        "threshold": res["threshold"],
        "threshold_config": {"k": cfg.k, "seed": cfg.seed, "bona_fide": cfg.bona_fide, "matrix": cfg.matrix},
        "bayes": res["bayes"]["rows"],
        "ideal_cfs_mass": res["bayes"]["cfs_mass"],
        "chi2_formula": cfg.chi2_formula,
    }
    if cfg.trials < 2:
        summary["warning"] = "fewer than 2 trials per grid point: Gaussian fits are degenerate (fwhm reported as 0)"
    write_json(rep.path("summary.json"), summary)
    for r in res["centers"]:
        print(f"x={r['x_ind']:.3f}  center={r['center']:.4f}  fwhm={r['fwhm']:.4f}  se={r['center_stderr']:.4f}")
    rep.finish()
    return EXIT_OK


def cmd_bayes(cfg: ExperimentConfig, args) -> int:
    exp = Experiment(cfg)
    rep = Report(args.out, "bayes", cfg)
    res = bayes_sweep(exp)
    _write_bayes(rep, res)
    write_json(rep.path("summary.json"), {"rows": res["rows"], "ideal_cfs_mass": res["cfs_mass"]})
    for r in res["rows"]:
        print(f"x={r['x_ind']:.3f}  slope={r['slope']:.5f}  expected={r['expected_slope']:.5f}")
    rep.finish()
    return EXIT_OK


def cmd_ksweep(cfg: ExperimentConfig, args) -> int:
    exp = Experiment(cfg)
    rep = Report(args.out, "ksweep", cfg)
    res = ksweep(exp, args.k_list)
    cols = ["k", "r1", "r2", "c0", "c947", "c1", "b947", "degenerate"]
    write_csv(rep.path("ksweep.csv"), cols, [[r[c] for c in cols] for r in res["rows"]])
    for k, curve in res["cumulative_counts"].items():
        write_curve(rep.path(f"cumulative_k{k}.csv"), curve)
    write_json(rep.path("summary.json"), {"rows": res["rows"], "bona_fide_events": res["bona_fide_events"]})
    for r in res["rows"]:
        r1 = "degenerate" if r["r1"] is None else f"{r['r1']:.5f}"
        r2 = "degenerate" if r["r2"] is None else f"{r['r2']:.5f}"
        print(f"k={r['k']:4d}  r1={r1}  r2={r2}")
    rep.finish()
    return EXIT_OK


def cmd_bonafide_sweep(cfg: ExperimentConfig, args) -> int:
    exp = Experiment(cfg)
    rep = Report(args.out, "bonafide-sweep", cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = bonafide_sweep(exp, args.cutoffs)
    cols = ["bona_fide", "n_cutoff", "r1", "r2", "c0", "c947", "c1", "b947", "degenerate"]
    write_csv(rep.path("rmetrics.csv"), cols, [[r[c] for c in cols] for r in res["rows"]])
    for name, rows in res["curves"].items():
        write_csv(rep.path(f"centers_{name}.csv"), ["x_ind", "center", "fwhm", "center_stderr"],
                  [[r["x_ind"], r["center"], r["fwhm"], r["center_stderr"]] for r in rows])
    write_json(rep.path("summary.json"), res)
    for r in res["rows"]:
        print(f"{r['bona_fide']:>16}  r1={_fmt(r['r1'])}  r2={_fmt(r['r2'])}")
    rep.finish()
    return EXIT_OK


def cmd_analysis(cfg: ExperimentConfig, args) -> int:
    exp = Experiment(cfg)
    rep = Report(args.out, "analysis", cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = structure_analysis(exp)
    for key, curve in res["cumulative"].items():
        write_curve(rep.path(f"cumulative_x{key}.csv"), curve)
    for key, curve in res["mean_l2"].items():
        write_curve(rep.path(f"mean_l2_x{key}.csv"), curve)
    shell_cols = list(res["shells"][0].keys())
    write_csv(rep.path("shells.csv"), shell_cols, [[r[c] for c in shell_cols] for r in res["shells"]])
    report = {
        key: {str(l): {"count": c, "total_prob": p} for l, (c, p) in hist.items()}
        for key, hist in res["histogram"].items()
    }
    write_json(rep.path("shell_report.json"), report)
    grid_keys = [x_label(x) for x in res["grid"]]
    write_csv(rep.path("tvd.csv"), ["n_cutoff"] + grid_keys, [[r["n_cutoff"]] + [r[k] for k in grid_keys] for r in res["tvd"]])
    ideal = next(r for r in res["shells"] if r["x_ind"] == 1.0) if 1.0 in res["grid"] else None
    zero = next(r for r in res["shells"] if r["x_ind"] == 0.0) if 0.0 in res["grid"] else None
    summary = {"shells": res["shells"], "tvd": res["tvd"]}
    for name, row in (("x=1", ideal), ("x=0", zero)):
        if row is not None:
            line = (f"{name}: L2<=sqrt2 mean prob {100 * row['le_sqrt2_mean']:.2f}%, "
                    f"share {100 * row['le_sqrt2_fraction']:.2f}%, overall mean {100 * row['overall_mean']:.2f}%")
            summary[f"headline_{name}"] = line
            print(line)
    write_json(rep.path("summary.json"), summary)
    rep.finish()
    return EXIT_OK


COMMANDS = {
    "matrix": cmd_matrix,
    "table": cmd_table,
    "sample": cmd_sample,
    "clusters": cmd_clusters,
    "figure1": cmd_figure1,
    "ksweep": cmd_ksweep,
    "bonafide-sweep": cmd_bonafide_sweep,
    "bayes": cmd_bayes,
    "analysis": cmd_analysis,
}


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--seed", type=int, help="master seed (u64)")
    common.add_argument("--out", type=Path, default=Path("out"), help="report directory")
    common.add_argument("--threads", type=int, help="worker threads (1 = strictly sequential)")
    common.add_argument("--chi2-verbatim", action="store_true", help="use expected counts N_i N_j / k")
    common.add_argument("--m", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--pool-size", type=int)
    common.add_argument("--events-per-trial", type=int)
    common.add_argument("--bona-fide-events", type=int)
    common.add_argument("--bona-fide", help="ideal | uniform | fd | approx:X:CUTOFF")
    common.add_argument("--burn-in", type=int)
    common.add_argument("--thinning", type=int)
    common.add_argument("--grid", type=_floats, help="comma-separated x_ind values")
    common.add_argument("--analysis-grid", type=_floats)
    common.add_argument("--input-modes", type=_ints)
    common.add_argument("--matrix", help="matrix JSON written by `bsval matrix`")
    common.add_argument("--fit-method", choices=["moments", "histogram-lsq"])

    parser = argparse.ArgumentParser(prog="bsval", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bsval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("matrix", parents=[common], help="write a Haar-random interferometer matrix")
    p = sub.add_parser("table", parents=[common], help="exhaustive collision-free distribution")
    p.add_argument("--law", default="ideal", help="ideal | uniform | fd | partial:X | approx:X:CUTOFF")
    p = sub.add_parser("sample", parents=[common], help="draw events")
    p.add_argument("--law", default="ideal")
    p.add_argument("--count", type=int)
    p.add_argument("--method", choices=["exact", "mcmc"], default="mcmc")
    p = sub.add_parser("clusters", parents=[common], help="fit K-means++ clusters on bona fide events")
    p.add_argument("--law", help="bona fide law (defaults to the config's)")
    sub.add_parser("figure1", parents=[common], help="chi2 centers and lnX slopes along the x_ind grid")
    p = sub.add_parser("ksweep", parents=[common], help="r1/r2 against the number of clusters")
    p.add_argument("--k-list", type=_ints)
    p = sub.add_parser("bonafide-sweep", parents=[common], help="r1/r2 for different bona fide samplers")
    p.add_argument("--cutoffs", type=_ints)
    sub.add_parser("bayes", parents=[common], help="lnX slope along the x_ind grid")
    sub.add_parser("analysis", parents=[common], help="distribution structure: cumulative, mean L2, shells, TVD")
    return parser


def resolve_config(args) -> ExperimentConfig:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
    overrides = {
        "seed": args.seed, "threads": args.threads, "m": args.m, "n": args.n, "k": args.k,
        "trials": args.trials, "pool_size": args.pool_size, "events_per_trial": args.events_per_trial,
        "bona_fide_events": args.bona_fide_events, "bona_fide": args.bona_fide, "burn_in": args.burn_in,
        "thinning": args.thinning, "test_grid": args.grid, "analysis_grid": args.analysis_grid,
        "input_modes": args.input_modes, "matrix": args.matrix, "fit_method": args.fit_method,
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    if args.chi2_verbatim:
        doc["chi2_formula"] = "verbatim-eq6"
    try:
        return ExperimentConfig.from_dict(doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except NumericalInvariantError as exc:
        print(f"numerical invariant failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
