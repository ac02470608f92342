"""Command-line entry point for analyses, simulations, fitting, and serving.

Deterministic verbs print `seed: deterministic`; stochastic verbs print
the seed they ran with, so any output line can be reproduced. File
output is written atomically (temp file + rename).
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
from pathlib import Path

import click

from . import audit as audit_mod
from . import tables
from .choice import ChoiceParams, fit_mle, load_observations_csv, make_synthetic, \
    predicted_peak_rate
from .clockgame import build_tree, export_tree
from .dynamics import BotPolicy, RevisionConfig, run_brd, run_pfu_sim
from .engine import SessionEvent, finalize_period
from .model import PERIOD_TYPES, VALUATIONS, Valuation, load_schedule, utility


def _write_out(text: str, out: str | None):
    if out is None:
        click.echo(text, nl=not text.endswith("\n"))
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", text=True)
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)
    click.echo(f"wrote {path}")


def _echo_seed(seed):
    click.echo(f"seed: {seed}" if seed is not None else "seed: deterministic",
               err=True)


@click.group(context_settings={"auto_envvar_prefix": "RATIONLAB"})
def main():
    """Uniform-rationing laboratory: tables, simulations, fitting, serving."""


@main.command("tables")
@click.option("--which", required=True,
              type=click.Choice(["schedule", "contingent", "profile-shares",
                                 "report-sets", "region-grid", "node-counts"]))
@click.option("--valuation", type=int, default=1, show_default=True,
              help="valuation id for region-grid")
@click.option("--subjects", type=int, default=46, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["markdown", "csv"]),
              default="markdown", show_default=True)
@click.option("--out", type=click.Path(), default=None)
def tables_cmd(which, valuation, subjects, fmt, out):
    """Emit one of the analysis tables."""
    _echo_seed(None)
    if which == "schedule":
        text = tables.schedule_table(fmt)
    elif which == "contingent":
        text = tables.contingent_table(fmt=fmt)
    elif which == "profile-shares":
        text = tables.profile_shares_table(fmt)
    elif which == "report-sets":
        text = tables.report_sets_render(fmt)
    elif which == "region-grid":
        text = tables.region_grid(valuation, fmt)
    else:
        text = tables.node_counts_table(subjects, fmt=fmt)
    _write_out(text, out)


@main.command("classify-tree")
@click.option("--schedule", "schedule_src", default="paper", show_default=True,
              help="'paper' or a path to a (period, typeA, typeB) table")
@click.option("--subjects", type=int, default=46, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["markdown", "csv"]),
              default="markdown", show_default=True)
@click.option("--export", "export_valuation", type=int, default=None,
              help="also dump the labeled tree for this valuation id")
@click.option("--out", type=click.Path(), default=None)
def classify_tree(schedule_src, subjects, fmt, export_valuation, out):
    """Walk the clock game under prescribed play and count node types."""
    _echo_seed(None)
    if schedule_src == "paper":
        schedule = PERIOD_TYPES
    else:
        schedule = [(a, b) for _, a, b in load_schedule(schedule_src)]
    text = tables.node_counts_table(subjects, schedule=schedule, fmt=fmt)
    if export_valuation is not None:
        val = VALUATIONS[export_valuation]
        text += "\n" + export_tree(build_tree(val), val)
    _write_out(text, out)


@main.command("simulate-brd")
@click.option("--valuation", default="all", show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--runs", type=int, default=100, show_default=True)
@click.option("--burn-in", type=int, default=1000, show_default=True)
@click.option("--samples", type=int, default=1000, show_default=True)
@click.option("--tie-break", default="uniform-over-br", show_default=True,
              type=click.Choice(["uniform-over-br", "closest-to-current",
                                 "closest-to-peak"]))
@click.option("--occupancy", is_flag=True, help="dump full occupancy as JSON")
@click.option("--format", "fmt", type=click.Choice(["markdown", "csv"]),
              default="csv", show_default=True)
@click.option("--out", type=click.Path(), default=None)
def simulate_brd(valuation, seed, runs, burn_in, samples, tie_break, occupancy,
                 fmt, out):
    """Myopic revision dynamics on the report game."""
    _echo_seed(seed)
    ids = list(VALUATIONS) if valuation == "all" else [int(valuation)]
    config = RevisionConfig(seed=seed, runs=runs, burn_in=burn_in,
                            samples=samples, tie_break=tie_break)
    stats = {vid: run_brd(VALUATIONS[vid], config) for vid in ids}
    text = tables.brd_table(stats, fmt)
    if occupancy:
        dump = {vid: {f"{k[0]},{k[1]}": v for k, v in s.occupancy.items()}
                for vid, s in stats.items()}
        text += json.dumps(dump, indent=2, sort_keys=True) + "\n"
    _write_out(text, out)


def _parse_policy(token: str) -> BotPolicy:
    parts = token.split(":")
    kind = parts[0]
    if kind == "stubborn":
        return BotPolicy("stubborn", report=int(parts[1]))
    if kind == "logit":
        return BotPolicy("logit", lambda_e=float(parts[1]), lambda_d=float(parts[2]))
    return BotPolicy(kind)


@main.command("simulate-pfu")
@click.option("--valuation", type=int, default=1, show_default=True)
@click.option("--policies", default="truthful,truthful", show_default=True,
              help="comma pair, e.g. truthful,myopic-best-responder or "
                   "stubborn:10,logit:1.4:1.8")
@click.option("--ticks", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="write the event log (jsonl) here")
def simulate_pfu(valuation, policies, ticks, seed, out):
    """Tick-level feedback-mechanism run between two bots."""
    _echo_seed(seed)
    val = VALUATIONS[valuation]
    pair = tuple(_parse_policy(p) for p in policies.split(","))
    events = run_pfu_sim(val, pair, ticks=ticks, seed=seed)
    report = finalize_period(events, val)
    click.echo(f"valuation {valuation} peaks {val.peaks}: allocation "
               f"{tuple(report.allocation)} uniform={report.is_uniform} "
               f"loss={report.group_loss}")
    if out:
        _write_out("".join(ev.to_json() + "\n" for ev in events), out)


@main.command("fit")
@click.option("--data", type=click.Path(exists=True), default=None,
              help="observations CSV: peak, observed reports, final, cluster")
@click.option("--synthetic", type=int, default=None,
              help="generate this many observations instead of reading data")
@click.option("--lambda-e", type=float, default=1.85, show_default=True)
@click.option("--lambda-d", type=float, default=1.66, show_default=True)
@click.option("--bootstrap", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def fit_cmd(data, synthetic, lambda_e, lambda_d, bootstrap, seed):
    """Estimate the report-choice model by maximum likelihood."""
    _echo_seed(seed)
    if data is None and synthetic is None:
        raise click.UsageError("pass --data or --synthetic")
    if data is not None:
        rows = load_observations_csv(data)
        source = data
    else:
        rows = make_synthetic(synthetic, ChoiceParams(lambda_e, lambda_d), seed=seed)
        source = f"synthetic({synthetic}) at ({lambda_e}, {lambda_d})"
    fit = fit_mle(rows, bootstrap=bootstrap, seed=seed)
    click.echo(f"data: {source} ({fit.n_observations} observations)")
    if fit.boundary:
        click.echo("estimate diverges to the boundary: data are separable, "
                   "no finite maximum-likelihood estimate exists")
        sys.exit(2)
    se = fit.std_errors or ("n/a", "n/a")
    click.echo(f"lambda_e = {fit.params.lambda_e:.4f} (se {se[0]})")
    click.echo(f"lambda_d = {fit.params.lambda_d:.4f} (se {se[1]})")
    click.echo(f"log-likelihood = {fit.log_likelihood:.3f}")
    if fit.single_cluster:
        click.echo("single cluster: bootstrap standard errors undefined")
    click.echo(f"predicted peak-report rate = "
               f"{predicted_peak_rate(rows, fit.params):.4f}")


@main.command("serve")
@click.option("--bind", default="127.0.0.1:8000", show_default=True)
@click.option("--data-dir", type=click.Path(), default="data", show_default=True)
@click.option("--reporting-seconds", type=float, default=30.0, show_default=True)
@click.option("--step-seconds", type=float, default=10.0, show_default=True)
def serve(bind, data_dir, reporting_seconds, step_seconds):
    """Run the live session service."""
    import uvicorn

    from .service import create_app

    _echo_seed(None)
    host, _, port = bind.partition(":")
    app = create_app(data_dir)
    app.state.default_windows = (reporting_seconds, step_seconds)
    uvicorn.run(app, host=host, port=int(port or 8000))


@main.command("replay")
@click.argument("path", type=click.Path(exists=True))
def replay_cmd(path):
    """Recompute outcomes from a persisted event log."""
    _echo_seed(None)
    with open(path) as fh:
        events = [SessionEvent.from_json(ln) for ln in fh if ln.strip()]
    chunks, chunk = [], []
    for ev in events:
        if ev.kind == "PeriodStarted" and chunk:
            chunks.append(chunk)
            chunk = []
        chunk.append(ev)
    if chunk:
        chunks.append(chunk)
    for chunk in chunks:
        peaks = tuple(chunk[0].payload["peaks"])
        report = finalize_period(chunk, Valuation(peaks))
        pays = [utility(p, a) for p, a in zip(peaks, report.allocation)]
        click.echo(f"period {chunk[0].payload['period']}: peaks {peaks} -> "
                   f"allocation {tuple(report.allocation)} payoffs {pays} "
                   f"uniform={report.is_uniform}")


@main.command("audit")
def audit_cmd():
    """Re-run every invariant suite; nonzero exit on any violation."""
    _echo_seed(None)
    failures = 0
    for name, problems in audit_mod.run_all().items():
        status = "ok" if not problems else f"FAIL ({len(problems)})"
        click.echo(f"{name}: {status}")
        for p in problems:
            click.echo(f"  - {p}")
        failures += len(problems)
    if failures:
        sys.exit(1)


if __name__ == "__main__":
    main()
