"""Command-line front end: reproducible experiments, reports and figures.

Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures.
The results directory can be overridden with $CHAINFUSE_RESULTS_DIR.
"""

from __future__ import annotations

import datetime as dt
import json
import os
import sys
from pathlib import Path

import click

from . import __version__
from .datasets import parse_dataset
from .correlation import phi_matrix
from .evaluation import (
    METHOD_NAMES,
    TUNING_METRICS,
    DEFAULT_PHI_GRID,
    ExperimentConfig,
    run_experiment,
)
from .metrics import METRIC_NAMES
from .stats import (
    bonferroni_dunn_cd,
    cd_groups,
    friedman,
    rank_table_from_results,
    read_results_csv,
    render_cd_diagram,
)

RESULTS_ENV = "CHAINFUSE_RESULTS_DIR"
_METHOD_CHOICES = tuple(m.lower() for m in METHOD_NAMES)


def _results_dir(out: str | None, default: str) -> Path:
    if out:
        return Path(out)
    return Path(os.environ.get(RESULTS_ENV, default))


def _parse_grid(text: str) -> tuple[float, ...]:
    try:
        grid = tuple(float(v) for v in text.split(",") if v.strip() != "")
    except ValueError as exc:
        raise click.BadParameter(f"bad phi grid {text!r}") from exc
    if not grid:
        raise click.BadParameter("phi grid must not be empty")
    return grid


def _load_dataset(arff: Path, xml: Path):
    return parse_dataset(Path(arff).read_text(), Path(xml).read_text())


def _write_manifest(out_dir: Path, command: str, payload: dict) -> None:
    manifest = {
        "tool": "chainfuse",
        "version": __version__,
        "created": dt.datetime.now(dt.timezone.utc).isoformat(),
        "command": command,
        **payload,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__)
def cli():
    """Multi-label chain-ensemble experiments with pluggable fusion schemes.

    Methods: mvecc, meecc, dtecc, uddtecc, stackecc, br, ebr, uddtebr.
    Metrics: accuracy, hamming_loss, subset_accuracy, precision, recall, f1.
    """


run_options = [
    click.option("--arff", required=True, type=click.Path(exists=True, dir_okay=False),
                 help="ARFF data file."),
    click.option("--xml-labels", required=True, type=click.Path(exists=True, dir_okay=False),
                 help="XML header naming the label attributes."),
    click.option("--ensemble-size", default=50, show_default=True, help="Members per ensemble."),
    click.option("--threshold", default=0.5, show_default=True,
                 help="Vote/mean decision threshold (mvecc, meecc, ebr)."),
    click.option("--phi-grid", default="0,0.25,0.5,0.75,1", show_default=True,
                 help="Comma-separated phi thresholds searched by uddt methods."),
    click.option("--folds", default=10, show_default=True, help="Outer cross-validation folds."),
    click.option("--seed", default=0, show_default=True, help="Root seed."),
    click.option("--tuning-metric", default="accuracy", show_default=True,
                 type=click.Choice(METRIC_NAMES), help="Metric optimized by the tuning loop."),
    click.option("--jobs", default=1, show_default=True, help="Parallel workers for outer folds."),
]


def add_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn
    return wrap


@cli.command()
@click.option("--method", required=True, type=click.Choice(_METHOD_CHOICES),
              help="Classification method to evaluate.")
@add_options(run_options)
@click.option("--out", default=None, help=f"Results directory (or ${RESULTS_ENV}).")
@click.option("--manifest", "manifest_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Re-run a previous run from its manifest (other flags ignored).")
def run(method, arff, xml_labels, ensemble_size, threshold, phi_grid, folds, seed,
        tuning_metric, jobs, out, manifest_path):
    """Evaluate one method on one dataset with k-fold cross-validation."""
    if manifest_path:
        stored = json.loads(Path(manifest_path).read_text())
        cfg_d = stored["config"]
        method = cfg_d["method"].lower()
        ensemble_size = cfg_d["ensemble_size"]
        threshold = cfg_d["threshold"]
        phi_grid = ",".join(str(v) for v in cfg_d["phi_grid"])
        folds = cfg_d["outer_folds"]
        seed = cfg_d["seed"]
        tuning_metric = cfg_d["tuning_metric"]
        arff = stored["datasets"][0]["arff"]
        xml_labels = stored["datasets"][0]["xml"]
    out_dir = _results_dir(out, "results")
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = ExperimentConfig(
        method=method.upper(),
        ensemble_size=ensemble_size,
        threshold=threshold,
        phi_grid=_parse_grid(phi_grid),
        outer_folds=folds,
        seed=seed,
        tuning_metric=tuning_metric,
    )
    name = Path(arff).stem
    ds = _load_dataset(arff, xml_labels)
    rows = run_experiment(
        [(name, ds)], [cfg.method], cfg, out_dir, resume=False, jobs=jobs,
        progress=lambda row: click.echo(f"finished {row['dataset']} / {row['method']}"),
    )
    _write_manifest(
        out_dir,
        "run",
        {
            "config": {
                "method": cfg.method,
                "ensemble_size": cfg.ensemble_size,
                "threshold": cfg.threshold,
                "phi_grid": list(cfg.phi_grid),
                "outer_folds": cfg.outer_folds,
                "seed": cfg.seed,
                "tuning_metric": cfg.tuning_metric,
            },
            "datasets": [
                {"name": name, "arff": str(Path(arff).resolve()),
                 "xml": str(Path(xml_labels).resolve())}
            ],
        },
    )
    row = rows[-1]
    if row["status"] != "ok":
        raise click.ClickException(f"evaluation failed: {row.get('error')}")
    for metric in METRIC_NAMES:
        cell = row["metrics"][metric]
        click.echo(f"{metric:16s} {cell['mean']:.4f} +/- {cell['std']:.4f}")
    click.echo(f"results written to {out_dir}")


@cli.command()
@click.option("--data-dir", required=True, type=click.Path(exists=True, file_okay=False),
              help="Directory holding <name>.arff and <name>.xml pairs.")
@click.option("--datasets", required=True,
              help="Comma-separated dataset names resolved inside --data-dir.")
@click.option("--methods", default="mvecc,meecc,dtecc,uddtecc,stackecc", show_default=True,
              help="Comma-separated methods forming the benchmark grid.")
@add_options(run_options[2:])  # same knobs minus the single-dataset paths
@click.option("--out", default=None, help=f"Results root (or ${RESULTS_ENV}).")
@click.option("--tuned-metrics", default=",".join(TUNING_METRICS), show_default=True,
              help="One benchmark pass (and results directory) per tuning metric.")
def bench(data_dir, datasets, methods, ensemble_size, threshold, phi_grid, folds, seed,
          tuning_metric, jobs, out, tuned_metrics):
    """Run a dataset x method grid, one pass per tuning metric."""
    del tuning_metric  # bench drives one pass per entry of --tuned-metrics
    method_list = [m.strip().upper() for m in methods.split(",") if m.strip()]
    for m in method_list:
        if m not in METHOD_NAMES:
            raise click.BadParameter(f"unknown method {m!r}")
    names = [n.strip() for n in datasets.split(",") if n.strip()]
    base = Path(data_dir)
    loaders = [
        (name, (lambda a=base / f"{name}.arff", x=base / f"{name}.xml": _load_dataset(a, x)))
        for name in names
    ]
    out_root = _results_dir(out, "bench-results")
    passes = [m.strip() for m in tuned_metrics.split(",") if m.strip()]
    for metric in passes:
        if metric not in METRIC_NAMES:
            raise click.BadParameter(f"unknown tuning metric {metric!r}")
        pass_dir = out_root / f"tuned_{metric}"
        pass_dir.mkdir(parents=True, exist_ok=True)
        cfg = ExperimentConfig(
            method=method_list[0],
            ensemble_size=ensemble_size,
            threshold=threshold,
            phi_grid=_parse_grid(phi_grid),
            outer_folds=folds,
            seed=seed,
            tuning_metric=metric,
        )
        click.echo(f"== tuning pass: {metric} -> {pass_dir}")
        run_experiment(
            loaders, method_list, cfg, pass_dir, resume=True, jobs=jobs,
            progress=lambda row: click.echo(
                f"   {row['dataset']} / {row['method']}: {row['status']}"
            ),
        )
        _write_manifest(
            pass_dir,
            "bench",
            {
                "config": {
                    "methods": method_list,
                    "ensemble_size": ensemble_size,
                    "threshold": threshold,
                    "phi_grid": list(_parse_grid(phi_grid)),
                    "outer_folds": folds,
                    "seed": seed,
                    "tuning_metric": metric,
                },
                "datasets": [
                    {"name": n, "arff": str((base / f"{n}.arff").resolve()),
                     "xml": str((base / f"{n}.xml").resolve())}
                    for n in names
                ],
            },
        )
    click.echo(f"benchmark written to {out_root}")


@cli.command(name="phi")
@click.option("--arff", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--xml-labels", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--abs", "absolute", is_flag=True, help="Emit absolute values.")
@click.option("--out", default="-", help="Output CSV path ('-' for stdout).")
def phi_cmd(arff, xml_labels, absolute, out):
    """Dump the label phi-coefficient matrix as CSV."""
    ds = _load_dataset(arff, xml_labels)
    pm = phi_matrix(ds)
    values = abs(pm.values) if absolute else pm.values
    lines = ["," + ",".join(pm.label_names)]
    for name, row in zip(pm.label_names, values):
        lines.append(name + "," + ",".join(repr(float(v)) for v in row))
    text = "\n".join(lines) + "\n"
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)
        click.echo(f"phi matrix written to {out}")


@cli.command(name="stats")
@click.option("--results", required=True, type=click.Path(exists=True, dir_okay=False),
              help="results.csv produced by run/bench.")
@click.option("--metric", default="accuracy", show_default=True, type=click.Choice(METRIC_NAMES))
@click.option("--alpha", default=0.1, show_default=True, help="Significance level.")
@click.option("--higher-is-better/--lower-is-better", "higher", default=None,
              help="Rank direction; defaults to lower-is-better for hamming_loss.")
@click.option("--filter-diversity-min", default=None, type=float,
              help="Keep only datasets with diversity strictly above this bound.")
@click.option("--out-dir", default=None, help=f"Report directory (or ${RESULTS_ENV}).")
def stats_cmd(results, metric, alpha, higher, filter_diversity_min, out_dir):
    """Rank methods, run the Friedman test, and draw the CD diagram."""
    if higher is None:
        higher = metric != "hamming_loss"
    rows = read_results_csv(results)
    rt = rank_table_from_results(rows, metric, higher, min_diversity=filter_diversity_min)
    stat, p_value = friedman(rt)
    cd = bonferroni_dunn_cd(rt.k, rt.n, alpha)
    groups = cd_groups(rt.avg_ranks(), cd)

    out = _results_dir(out_dir, "stats-report")
    out.mkdir(parents=True, exist_ok=True)
    rank_csv = out / f"ranks_{metric}.csv"
    with rank_csv.open("w") as handle:
        handle.write("dataset," + ",".join(rt.methods) + "\n")
        for ds_name, row in zip(rt.datasets, rt.ranks):
            handle.write(ds_name + "," + ",".join(repr(float(v)) for v in row) + "\n")
        handle.write("avg_rank," + ",".join(repr(float(v)) for v in rt.avg_ranks()) + "\n")
    svg_path = out / f"cd_{metric}.svg"
    render_cd_diagram(rt, cd, svg_path)
    report = {
        "metric": metric,
        "higher_is_better": higher,
        "datasets": rt.n,
        "methods": list(rt.methods),
        "avg_ranks": {m: float(v) for m, v in zip(rt.methods, rt.avg_ranks())},
        "friedman_statistic": stat,
        "friedman_p_value": p_value,
        "alpha": alpha,
        "critical_difference": cd,
        "groups": [[rt.methods[i] for i in g] for g in groups],
        "min_diversity": filter_diversity_min,
    }
    (out / f"stats_{metric}.json").write_text(json.dumps(report, indent=2, sort_keys=True))

    click.echo(f"datasets ranked: {rt.n}")
    for m, v in sorted(report["avg_ranks"].items(), key=lambda kv: kv[1]):
        click.echo(f"  {m:10s} avg rank {v:.6f}")
    click.echo(f"Friedman chi2 = {stat:.6f}, p = {p_value:.6f}")
    click.echo(f"Bonferroni-Dunn CD (alpha={alpha}) = {cd:.6f}")
    for group in report["groups"]:
        click.echo(f"  group: {', '.join(group)}")
    click.echo(f"report written to {out} ({rank_csv.name}, {svg_path.name})")


@cli.command()
@click.argument("names", nargs=-1, required=True)
@click.option("--dest", default="data", show_default=True, help="Target directory.")
@click.option("--url", default=None, help="Override source URL (zip or .arff).")
@click.option("--timeout", default=60.0, show_default=True)
def fetch(names, dest, url, timeout):
    """Download benchmark datasets (<name>.arff + <name>.xml) from public mirrors."""
    from .fetch import fetch_dataset

    if url and len(names) != 1:
        raise click.BadParameter("--url works with exactly one dataset name")
    for name in names:
        arff_path, xml_path = fetch_dataset(name, Path(dest), url=url, timeout=timeout)
        click.echo(f"{name}: {arff_path} {xml_path}")


def main(argv=None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except (click.UsageError, click.BadParameter) as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 2
    except Exception as exc:  # runtime failure
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
