"""Characteristics to weights, weights to realized returns, spread factors.

Timing convention, fixed globally: weights formed with information at month t
earn month t+1 returns, and the result is stamped at t+1 (no lookahead).
Assets whose next-month return is missing are dropped and the surviving
weights renormalized, approximating investing only in tradable names.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DataError
from .panel import DateIndex, FactorSeries, Panel
from .transforms import align_panels

SORT_CELLS_2X3 = ("SG", "SN", "SV", "BG", "BN", "BV")


def weights_from_membership(member: Panel, weight_by: Panel | None = None,
                            flags: list[str] | None = None) -> Panel:
    """Long-only weights proportional to ``weight_by`` over member cells.

    Equal weight when ``weight_by`` is absent. Members with a missing weight
    basis are excluded; negative weight bases are an error for long-only
    legs. Rows sum to one; dates with no members are missing and flagged.
    """
    if weight_by is None:
        dates, assets, (gm,) = align_panels(member)
        gw = np.where(~np.isnan(gm), 1.0, np.nan)
        inputs = [member]
    else:
        dates, assets, (gm, gw) = align_panels(member, weight_by)
        inputs = [member, weight_by]

    is_member = ~np.isnan(gm) & (gm != 0)
    usable = is_member & ~np.isnan(gw)
    if np.any(usable & (gw < 0)):
        raise DataError("negative weight basis in a long-only leg")

    out = np.full(gm.shape, np.nan)
    for i in range(len(dates)):
        row_use = usable[i]
        total = float(np.sum(gw[i, row_use]))
        if not np.any(row_use) or total <= 0:
            if flags is not None:
                flags.append(f"weights_from_membership: {dates[i]}: no members")
            continue
        out[i, row_use] = gw[i, row_use] / total
    params = {"weighting": "equal" if weight_by is None else "proportional"}
    return Panel.derive("weights_from_membership", params, inputs, dates, assets, out)


def portfolio_return(w: Panel, r: Panel, flags: list[str] | None = None) -> FactorSeries:
    """Realized next-month portfolio returns from a weight panel.

    For each formation date t with weights, the return stamped at calendar
    month t+1 is the weight-renormalized average of r at t+1 over assets with
    a non-missing return. Formation dates whose t+1 is beyond the index
    produce no output.
    """
    dates, assets, (gw, gr) = align_panels(w, r)
    stamped: list[int] = []
    values: list[float] = []
    for i, o in enumerate(dates.ordinals):
        wrow = gw[i]
        held = ~np.isnan(wrow)
        if not np.any(held):
            continue
        nxt = dates.position(int(o) + 1)
        if nxt is None:
            continue
        rrow = gr[nxt]
        live = held & ~np.isnan(rrow)
        total = float(np.sum(wrow[live]))
        if not np.any(live) or total <= 0:
            if flags is not None:
                flags.append(f"portfolio_return: {dates[nxt]}: no tradable members")
            stamped.append(int(o) + 1)
            values.append(np.nan)
            continue
        stamped.append(int(o) + 1)
        values.append(float(np.sum((wrow[live] / total) * rrow[live])))
    return FactorSeries(
        dates=DateIndex.from_ordinals(stamped),
        values=np.array(values, dtype=np.float64),
        name="portfolio_return",
    )


def independent_sort_2x3(size_bins: Panel, value_bins: Panel) -> dict[str, Panel]:
    """Six 2x3 intersection memberships keyed SG, SN, SV, BG, BN, BV.

    Size codes 1 (small) and 2 (big) cross value codes 1 (growth), 2
    (neutral), 3 (value). Assets missing either bin belong to no portfolio,
    so the memberships partition the doubly-binned universe.
    """
    dates, assets, (gs, gv) = align_panels(size_bins, value_bins)
    valid_s = ~np.isnan(gs)
    valid_v = ~np.isnan(gv)
    if np.any(valid_s & ((gs < 1) | (gs > 2))):
        raise DataError("size bins must be coded 1 (small) or 2 (big)")
    if np.any(valid_v & ((gv < 1) | (gv > 3))):
        raise DataError("value bins must be coded 1..3 (growth/neutral/value)")

    out = {}
    for cell in SORT_CELLS_2X3:
        s_code = 1 if cell[0] == "S" else 2
        v_code = {"G": 1, "N": 2, "V": 3}[cell[1]]
        hit = valid_s & valid_v & (gs == s_code) & (gv == v_code)
        grid = np.where(valid_s & valid_v, hit.astype(np.float64), np.nan)
        out[cell] = Panel.derive(
            "independent_sort_2x3", {"cell": cell},
            [size_bins, value_bins], dates, assets, grid,
        )
    return out


def _align_series_values(legs: Sequence[FactorSeries]) -> tuple[DateIndex, list[np.ndarray]]:
    dates = legs[0].dates
    for leg in legs[1:]:
        dates = dates.union(leg.dates)
    cols = []
    for leg in legs:
        col = np.full(len(dates), np.nan)
        for i, o in enumerate(leg.dates.ordinals):
            col[dates.position(int(o))] = leg.values[i]
        cols.append(col)
    return dates, cols


def spread_2x3(legs: dict[str, FactorSeries] | Sequence[FactorSeries],
               name: str = "spread") -> FactorSeries:
    """0.5*(SV+BV) - 0.5*(SG+BG) per date; missing if any required leg is missing."""
    if isinstance(legs, dict):
        series = [legs[c] for c in SORT_CELLS_2X3]
    else:
        series = list(legs)
        if len(series) != 6:
            raise DataError("spread_2x3 takes six legs ordered SG, SN, SV, BG, BN, BV")
    dates, cols = _align_series_values(series)
    sg, _, sv, bg, _, bv = cols
    values = 0.5 * (sv + bv) - 0.5 * (sg + bg)
    return FactorSeries(dates=dates, values=values, name=name)


def spread_topbottom(top: FactorSeries, bottom: FactorSeries,
                     name: str = "spread") -> FactorSeries:
    """Top leg minus bottom leg per date."""
    dates, (t, b) = _align_series_values([top, bottom])
    return FactorSeries(dates=dates, values=t - b, name=name)


def turnover(w: Panel) -> FactorSeries:
    """Half the sum of absolute weight changes between consecutive weight rows.

    Missing weights count as zero, so a full portfolio rotation scores 1.0.
    """
    if w.n_dates < 2:
        raise DataError("turnover needs at least two weight dates")
    grid = np.where(np.isnan(w.values), 0.0, w.values)
    diffs = 0.5 * np.sum(np.abs(grid[1:] - grid[:-1]), axis=1)
    return FactorSeries(
        dates=DateIndex(list(w.dates)[1:]),
        values=diffs,
        name="turnover",
    )
