"""Standardized four-section diagnostics report for a candidate spread factor.

Sections follow the replication-protocol layout: coverage by period, spread
summary statistics, risk-adjusted alphas by model, and alphas by size
quantile. Rendering is deterministic (returns at 4 decimals, t-statistics at
2) so reports golden-file cleanly; the markdown is a pure view of the JSON
document. The narrative is templated annotation text, never generated.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DataError, EngineError
from .panel import FactorSeries, Panel
from .portfolio import turnover as turnover_op
from .riskstats import (
    CoverageRow,
    RegressionResult,
    StratifiedCell,
    SummaryStats,
    coverage_by_period,
    size_stratified_alphas,
    summarize,
    ts_regress,
)

SECTION_COVERAGE = "Coverage by Period"
SECTION_SUMMARY = "Spread Portfolio Summary Statistics"
SECTION_ALPHAS = "Alpha, Coefficients, and t-Statistics by Model"
SECTION_SIZE = "Alpha and t-Statistics by Model and Size Quantile"

T_HURDLE = 3.0
T_CONVENTIONAL = 1.96

INSUFFICIENT = "insufficient data"


@dataclass
class DiagnosticsReport:
    metadata: dict
    section_coverage: list[CoverageRow] | str
    section_summary: dict | str
    section_alphas: list[tuple[str, RegressionResult]] | str
    section_size: list[StratifiedCell] | str
    annotations: list[str] = field(default_factory=list)


def build_report(
    spread: FactorSeries,
    char: Panel,
    cap: Panel,
    size_bins: Panel,
    models: Mapping[str, Sequence[FactorSeries]],
    spread_builder: Callable[[Panel], FactorSeries] | None = None,
    weight_panel: Panel | None = None,
    recipe_reference: str = "",
    se_method: str = "ols",
    nw_lags: int = 0,
) -> DiagnosticsReport:
    """Assemble all four sections; section-level failures degrade to markers."""
    live = spread.nonmissing()
    span = []
    if np.any(live):
        idx = np.flatnonzero(live)
        span = [spread.dates[int(idx[0])], spread.dates[int(idx[-1])]]
    metadata = {
        "factor": spread.name,
        "sample_span": span,
        "recipe": recipe_reference,
        "panel_ids": {
            "characteristic": char.panel_id,
            "cap": cap.panel_id,
            "size_bins": size_bins.panel_id,
        },
        "se_method": se_method if se_method == "ols" else f"newey_west({nw_lags})",
    }
    annotations: list[str] = []

    try:
        coverage = coverage_by_period(char, cap)
    except EngineError as exc:
        coverage = INSUFFICIENT
        annotations.append(f"coverage section unavailable: {exc}")

    try:
        stats = summarize(spread)
        summary = {
            "mean": stats.mean,
            "sd": stats.sd,
            "sharpe_annualized": stats.sharpe_annualized,
            "skewness": stats.skewness,
            "min": stats.min,
            "max": stats.max,
            "n_obs": stats.n_obs,
            "mean_turnover": None,
        }
        if stats.flags:
            summary = INSUFFICIENT
            annotations.extend(stats.flags)
        elif weight_panel is not None:
            try:
                summary["mean_turnover"] = float(np.nanmean(turnover_op(weight_panel).values))
            except EngineError:
                pass
    except EngineError as exc:
        summary = INSUFFICIENT
        annotations.append(f"summary section unavailable: {exc}")

    alphas: list[tuple[str, RegressionResult]] | str = []
    try:
        for model, factors in models.items():
            alphas.append(
                (model, ts_regress(spread, list(factors), se_method=se_method, nw_lags=nw_lags))
            )
        if not alphas:
            alphas = INSUFFICIENT
    except EngineError as exc:
        alphas = INSUFFICIENT
        annotations.append(f"alpha section unavailable: {exc}")

    if spread_builder is None:
        size_table: list[StratifiedCell] | str = INSUFFICIENT
        annotations.append("size section unavailable: no spread builder provided")
    else:
        try:
            size_table = size_stratified_alphas(
                spread_builder, size_bins, models, se_method=se_method, nw_lags=nw_lags
            )
        except EngineError as exc:
            size_table = INSUFFICIENT
            annotations.append(f"size section unavailable: {exc}")

    if isinstance(alphas, list):
        best_t = max((r.t_alpha for _, r in alphas if not math.isnan(r.t_alpha)),
                     default=float("nan"))
        if not math.isnan(best_t) and best_t >= T_HURDLE:
            annotations.append(
                f"alpha t-statistic {best_t:.2f} clears the {T_HURDLE:.1f} hurdle "
                "recommended for new discoveries"
            )

    if isinstance(size_table, list):
        bins = sorted({c.size_bin for c in size_table})
        if len(bins) >= 2:
            small_ts = [c.result.t_alpha for c in size_table
                        if c.size_bin == bins[0] and c.result is not None]
            big_ts = [c.result.t_alpha for c in size_table
                      if c.size_bin == bins[-1] and c.result is not None]
            small_best = max(small_ts, default=float("nan"))
            big_best = max(big_ts, default=float("nan"))
            if (not math.isnan(small_best) and small_best >= T_CONVENTIONAL
                    and (math.isnan(big_best) or big_best < T_CONVENTIONAL)):
                annotations.append(
                    "caution: performance concentrates in the smallest size "
                    "quantile, where trading frictions are largest"
                )

    return DiagnosticsReport(
        metadata=metadata,
        section_coverage=coverage,
        section_summary=summary,
        section_alphas=alphas,
        section_size=size_table,
        annotations=annotations,
    )


# -- rendering ---------------------------------------------------------------


def _r4(x) -> float | None:
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else round(x, 4)


def _r2(x) -> float | None:
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else round(x, 2)


def _f4(x) -> str:
    v = _r4(x)
    return "n/a" if v is None else f"{v:.4f}"


def _f2(x) -> str:
    v = _r2(x)
    return "n/a" if v is None else f"{v:.2f}"


def _regression_dict(result: RegressionResult) -> dict:
    return {
        "alpha": _r4(result.alpha),
        "t_alpha": _r2(result.t_alpha),
        "betas": {
            name: {"coef": _r4(b), "t": _r2(t)}
            for name, b, t in zip(result.factor_names, result.betas, result.t_betas)
        },
        "r2": _r4(result.r2),
        "n_obs": result.n_obs,
        "se_method": result.se_method,
    }


def report_document(r: DiagnosticsReport) -> dict:
    """The canonical JSON-ready document; markdown renders this and nothing more."""
    doc: dict = {"metadata": r.metadata, "annotations": list(r.annotations)}

    if isinstance(r.section_coverage, str):
        doc["coverage_by_period"] = r.section_coverage
    else:
        doc["coverage_by_period"] = [
            {
                "bucket": row.bucket,
                "start": row.start,
                "end": row.end,
                "security_fraction": _r4(row.security_fraction),
                "cap_share": _r4(row.cap_share),
                "n_months": row.n_months,
            }
            for row in r.section_coverage
        ]

    if isinstance(r.section_summary, str):
        doc["summary_statistics"] = r.section_summary
    else:
        s = r.section_summary
        doc["summary_statistics"] = {
            "mean": _r4(s["mean"]),
            "sd": _r4(s["sd"]),
            "sharpe_annualized": _r4(s["sharpe_annualized"]),
            "skewness": _r4(s["skewness"]),
            "min": _r4(s["min"]),
            "max": _r4(s["max"]),
            "n_obs": s["n_obs"],
            "mean_turnover": _r4(s["mean_turnover"]),
        }

    if isinstance(r.section_alphas, str):
        doc["alphas_by_model"] = r.section_alphas
    else:
        doc["alphas_by_model"] = [
            dict(model=model, **_regression_dict(res)) for model, res in r.section_alphas
        ]

    if isinstance(r.section_size, str):
        doc["alphas_by_size"] = r.section_size
    else:
        doc["alphas_by_size"] = [
            {
                "size_bin": cell.size_bin,
                "model": cell.model,
                "alpha": _r4(cell.result.alpha) if cell.result else None,
                "t_alpha": _r2(cell.result.t_alpha) if cell.result else None,
                "note": cell.note,
            }
            for cell in r.section_size
        ]
    return doc


def render_json(r: DiagnosticsReport) -> str:
    return json.dumps(report_document(r), sort_keys=True, indent=2) + "\n"


def render_markdown(r: DiagnosticsReport) -> str:
    doc = report_document(r)
    md = r.metadata
    lines = [f"# Factor Diagnostics: {md['factor']}", ""]
    span = md["sample_span"]
    lines.append(f"- sample span: {span[0]}..{span[1]}" if span else "- sample span: empty")
    lines.append(f"- recipe: {md['recipe'] or 'n/a'}")
    lines.append(f"- standard errors: {md['se_method']}")
    for key, val in sorted(md["panel_ids"].items()):
        lines.append(f"- {key} panel: {val}")
    lines.append("")

    lines.append(f"## {SECTION_COVERAGE}")
    lines.append("")
    cov = doc["coverage_by_period"]
    if isinstance(cov, str):
        lines.append(f"_{cov}_")
    else:
        lines.append("| bucket | span | security fraction | cap share | months |")
        lines.append("|---|---|---|---|---|")
        for row in cov:
            lines.append(
                f"| {row['bucket']} | {row['start']}..{row['end']} "
                f"| {_f4(row['security_fraction'])} | {_f4(row['cap_share'])} "
                f"| {row['n_months']} |"
            )
    lines.append("")

    lines.append(f"## {SECTION_SUMMARY}")
    lines.append("")
    summ = doc["summary_statistics"]
    if isinstance(summ, str):
        lines.append(f"_{summ}_")
    else:
        lines.append("| statistic | value |")
        lines.append("|---|---|")
        lines.append(f"| mean (monthly) | {_f4(summ['mean'])} |")
        lines.append(f"| sd (monthly) | {_f4(summ['sd'])} |")
        lines.append(f"| sharpe (annualized) | {_f4(summ['sharpe_annualized'])} |")
        lines.append(f"| skewness | {_f4(summ['skewness'])} |")
        lines.append(f"| min | {_f4(summ['min'])} |")
        lines.append(f"| max | {_f4(summ['max'])} |")
        lines.append(f"| months | {summ['n_obs']} |")
        lines.append(f"| mean turnover | {_f4(summ['mean_turnover'])} |")
    lines.append("")

    lines.append(f"## {SECTION_ALPHAS}")
    lines.append("")
    alphas = doc["alphas_by_model"]
    if isinstance(alphas, str):
        lines.append(f"_{alphas}_")
    else:
        for entry in alphas:
            lines.append(f"### model: {entry['model']}")
            lines.append("")
            lines.append("| term | coefficient | t-stat |")
            lines.append("|---|---|---|")
            lines.append(f"| alpha | {_f4(entry['alpha'])} | {_f2(entry['t_alpha'])} |")
            for name in sorted(entry["betas"]):
                beta = entry["betas"][name]
                lines.append(f"| {name} | {_f4(beta['coef'])} | {_f2(beta['t'])} |")
            lines.append("")
            lines.append(
                f"r2 {_f4(entry['r2'])}, n {entry['n_obs']}, se {entry['se_method']}"
            )
            lines.append("")

    lines.append(f"## {SECTION_SIZE}")
    lines.append("")
    size = doc["alphas_by_size"]
    if isinstance(size, str):
        lines.append(f"_{size}_")
    else:
        lines.append("| size bin | model | alpha | t-stat | note |")
        lines.append("|---|---|---|---|---|")
        for cell in size:
            lines.append(
                f"| {cell['size_bin']} | {cell['model']} | {_f4(cell['alpha'])} "
                f"| {_f2(cell['t_alpha'])} | {cell['note']} |"
            )
    lines.append("")

    lines.append("## Notes")
    lines.append("")
    if doc["annotations"]:
        for note in doc["annotations"]:
            lines.append(f"- {note}")
    else:
        lines.append("- none")
    lines.append("")
    return "\n".join(lines)
