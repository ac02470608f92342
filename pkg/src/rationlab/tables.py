"""Rendering of the analysis tables as aligned markdown or CSV.

Numbers come from the exact-fraction oracles in the analysis modules;
every table header names that provenance so rounded values are never
mistaken for inputs.
"""

from __future__ import annotations

import csv
import io

from .clockgame import CATEGORIES, schedule_walk
from .equilibrium import (
    classify_profiles,
    expected_payoff_row,
    overall_nash_share,
    report_sets_table,
    round3,
)
from .model import PERIOD_TYPES, VALUATIONS, uniform_allocate, utility

ORACLE_NOTE = "exact-fraction enumeration oracle; decimals are display rounding"


def render_markdown(headers: list[str], rows: list[list], title: str = "") -> str:
    cells = [[str(h) for h in headers]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]

    def fmt(row):
        return "| " + " | ".join(c.ljust(w) for c, w in zip(row, widths)) + " |"

    out = []
    if title:
        out.append(f"# {title}")
        out.append(f"_{ORACLE_NOTE}_")
        out.append("")
    out.append(fmt(cells[0]))
    out.append("|" + "|".join("-" * (w + 2) for w in widths) + "|")
    out.extend(fmt(r) for r in cells[1:])
    return "\n".join(out) + "\n"


def render_csv(headers: list[str], rows: list[list], title: str = "") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    if title:
        writer.writerow([f"# {title} ({ORACLE_NOTE})"])
    writer.writerow(headers)
    writer.writerows(rows)
    return buf.getvalue()


def _render(headers, rows, title, fmt):
    render = render_csv if fmt == "csv" else render_markdown
    return render(headers, rows, title)


def _span(values: frozenset[int] | set[int]) -> str:
    if not values:
        return "empty"
    vs = sorted(values)
    runs, start, prev = [], vs[0], vs[0]
    for v in vs[1:]:
        if v == prev + 1:
            prev = v
            continue
        runs.append((start, prev))
        start = prev = v
    runs.append((start, prev))
    return " ".join(f"{a}" if a == b else f"{a}-{b}" for a, b in runs)


def schedule_table(fmt: str = "markdown") -> str:
    headers = ["period", "typeA", "typeB", "allocA", "allocB", "payoffA", "payoffB"]
    rows = []
    for period, (a, b) in enumerate(PERIOD_TYPES, start=1):
        alloc = uniform_allocate((a, b))
        rows.append([period, a, b, alloc[0], alloc[1],
                     utility(a, alloc[0]), utility(b, alloc[1])])
    return _render(headers, rows, "Type assignments and target outcomes by period", fmt)


def contingent_table(peak: int = 5, reports: tuple[int, ...] = (4, 5),
                     fmt: str = "markdown") -> str:
    headers = ["report \\ partner"] + [str(o) for o in range(21)]
    rows = []
    for r in reports:
        rows.append([f"u(peak {peak}, report {r})"] +
                    [expected_payoff_row(peak, r, o) for o in range(21)])
    return _render(headers, rows, "Payoff of each report by partner report", fmt)


def profile_shares_table(fmt: str = "markdown") -> str:
    headers = ["valuation", "peaks", "produce-U", "share", "share(3dp)",
               "nash", "share", "share(3dp)", "nash&U", "truthful share"]
    rows = []
    for vid, val in VALUATIONS.items():
        _, s = classify_profiles(val)
        rows.append([
            vid, f"({val.peaks[0]},{val.peaks[1]})",
            s.n_produce_uniform, s.produce_uniform_share,
            f"{round3(s.produce_uniform_share):.3f}",
            s.n_nash, s.nash_share, f"{round3(s.nash_share):.3f}",
            s.n_nash_produce_uniform, f"{round3(s.truthful_share):.3f}",
        ])
    pooled = overall_nash_share()
    rows.append(["overall", "", "", "", "", "", pooled, f"{round3(pooled):.3f}",
                 "", ""])
    return _render(headers, rows, "Share of profile space by classification", fmt)


def report_sets_render(fmt: str = "markdown") -> str:
    headers = ["valuation", "peak", "SPE-supportable", "surplus-destroying"]
    rows = [[r.valuation_id, r.peak, _span(r.spe_supportable), _span(r.sdr)]
            for r in report_sets_table()]
    return _render(headers, rows, "First-mover report sets by peak and valuation", fmt)


def region_grid(valuation_id: int, fmt: str = "csv") -> str:
    val = VALUATIONS[valuation_id]
    cls, _ = classify_profiles(val)
    headers = ["report1", "report2", "produces_uniform", "is_nash", "is_truthful"]
    rows = [[r1, r2, int(c.produces_uniform), int(c.is_nash), int(c.is_truthful)]
            for (r1, r2), c in sorted(cls.items())]
    return _render(headers, rows,
                   f"Profile grid for valuation {valuation_id} {val.peaks}", fmt)


def node_counts_table(subjects: int = 46, schedule=None, fmt: str = "markdown") -> str:
    counts = schedule_walk(schedule or PERIOD_TYPES, subjects)
    headers = ["node classification", "predicted count"]
    rows = [[c, counts[c]] for c in CATEGORIES]
    rows.append(["total", counts["total"]])
    rows.append(["initial (sum)", counts["initial"]])
    return _render(headers, rows,
                   f"Predicted node visits under prescribed play, {subjects} subjects",
                   fmt)


def brd_table(stats_by_valuation: dict[int, object], fmt: str = "csv") -> str:
    headers = ["valuation", "peaks", "uniform_rate", "ds_rate"]
    rows = []
    for vid, stats in stats_by_valuation.items():
        val = VALUATIONS[vid]
        rows.append([vid, f"({val.peaks[0]},{val.peaks[1]})",
                     f"{stats.uniform_rate:.4f}", f"{stats.ds_rate:.4f}"])
    mean = sum(s.uniform_rate for s in stats_by_valuation.values()) / \
        max(1, len(stats_by_valuation))
    rows.append(["mean", "", f"{mean:.4f}", ""])
    return _render(headers, rows, "Revision-dynamics occupancy rates", fmt)
