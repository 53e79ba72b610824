"""Immutable monthly T x N panels, persistence, registry, and provenance graphs.

A Panel is the universal currency of the engine: a grid of float64 values
indexed by monthly dates (rows) and asset ids (columns), with NaN as the
explicit missing marker. Panels never mutate after registration; every
operation produces a new panel carrying a ProvenanceRecord, so the registry
forms a directed acyclic graph from raw inputs to final outputs.

Scalar time series (factor returns, thresholds) travel as one-column panels
whose single asset is named "value"; FactorSeries is the thin host-side view.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, RegistryError

_ID_RE = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_.\-]*$")
_PERIOD_RE = re.compile(r"^(\d{4})-(\d{2})$")

SERIES_ASSET = "value"


def month_ordinal(period: str) -> int:
    """Map 'YYYY-MM' to a month count since year 0 (calendar arithmetic)."""
    m = _PERIOD_RE.match(period)
    if not m:
        raise DataError(f"bad period {period!r}, expected YYYY-MM")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise DataError(f"bad month in period {period!r}")
    return year * 12 + (month - 1)


def ordinal_to_period(ordinal: int) -> str:
    year, month = divmod(int(ordinal), 12)
    return f"{year:04d}-{month + 1:02d}"


def shift_period(period: str, months: int) -> str:
    return ordinal_to_period(month_ordinal(period) + months)


class DateIndex:
    """Strictly increasing sequence of monthly periods. Gaps are allowed."""

    __slots__ = ("periods", "ordinals", "_pos")

    def __init__(self, periods: Sequence[str]):
        periods = tuple(periods)
        ordinals = np.array([month_ordinal(p) for p in periods], dtype=np.int64)
        if len(ordinals) > 1 and not np.all(np.diff(ordinals) > 0):
            raise DataError("date index must be strictly increasing with no duplicates")
        self.periods = periods
        self.ordinals = ordinals
        self.ordinals.setflags(write=False)
        self._pos = {int(o): i for i, o in enumerate(ordinals)}

    @classmethod
    def from_ordinals(cls, ordinals: Iterable[int]) -> "DateIndex":
        return cls([ordinal_to_period(o) for o in ordinals])

    @classmethod
    def range(cls, start: str, n_months: int) -> "DateIndex":
        o = month_ordinal(start)
        return cls.from_ordinals(range(o, o + n_months))

    def __len__(self) -> int:
        return len(self.periods)

    def __iter__(self):
        return iter(self.periods)

    def __getitem__(self, i: int) -> str:
        return self.periods[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, DateIndex) and self.periods == other.periods

    def __repr__(self) -> str:
        if not self.periods:
            return "DateIndex([])"
        return f"DateIndex({self.periods[0]}..{self.periods[-1]}, n={len(self)})"

    def position(self, ordinal: int) -> int | None:
        """Row index of a month ordinal, or None when the period is absent."""
        return self._pos.get(int(ordinal))

    def union(self, other: "DateIndex") -> "DateIndex":
        merged = sorted(set(self._pos) | set(other._pos))
        return DateIndex.from_ordinals(merged)

    def intersection(self, other: "DateIndex") -> "DateIndex":
        common = sorted(set(self._pos) & set(other._pos))
        return DateIndex.from_ordinals(common)


@dataclass(frozen=True)
class ProvenanceRecord:
    """What produced a panel: operation name, parameters, input panel ids.

    Params hold scalars and strings only; list-valued arguments are stored as
    canonical JSON strings. Source panels use op_name "source" and no inputs.
    ``created_seq`` is assigned at registration time (-1 while unregistered).
    """

    op_name: str
    params: Mapping[str, object] = field(default_factory=dict)
    input_ids: tuple[str, ...] = ()
    created_seq: int = -1

    def to_dict(self) -> dict:
        return {
            "op_name": self.op_name,
            "params": dict(self.params),
            "input_ids": list(self.input_ids),
            "created_seq": self.created_seq,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ProvenanceRecord":
        return cls(
            op_name=str(d["op_name"]),
            params=dict(d.get("params", {})),
            input_ids=tuple(d.get("input_ids", ())),
            created_seq=int(d.get("created_seq", -1)),
        )


def encode_params(params: Mapping[str, object] | None) -> dict:
    """Flatten operation arguments into the scalar/string-only provenance map."""
    out = {}
    for key, val in (params or {}).items():
        if val is None:
            continue
        if isinstance(val, (str, bool, int, float)):
            out[key] = val
        else:
            out[key] = json.dumps(val, sort_keys=True, separators=(",", ":"))
    return out


SOURCE = "source"


@dataclass(frozen=True)
class Panel:
    """Immutable T x N grid of float64 values with NaN as the missing marker."""

    panel_id: str
    dates: DateIndex
    assets: tuple[str, ...]
    values: np.ndarray
    provenance: ProvenanceRecord

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (len(self.dates), len(self.assets)):
            raise DataError(
                f"value grid {vals.shape} does not match "
                f"{len(self.dates)}x{len(self.assets)} frame"
            )
        if len(set(self.assets)) != len(self.assets):
            raise DataError("asset ids must be unique")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "assets", tuple(self.assets))

    # -- constructors ------------------------------------------------------

    @classmethod
    def source(cls, panel_id: str, dates, assets, values, params=None) -> "Panel":
        if isinstance(dates, (list, tuple)):
            dates = DateIndex(dates)
        return cls(
            panel_id=panel_id,
            dates=dates,
            assets=tuple(assets),
            values=np.asarray(values, dtype=np.float64),
            provenance=ProvenanceRecord(SOURCE, encode_params(params)),
        )

    @classmethod
    def derive(cls, op_name, params, inputs: Sequence["Panel"], dates, assets, values) -> "Panel":
        """New unregistered panel whose provenance points at ``inputs``."""
        return cls(
            panel_id="",
            dates=dates,
            assets=tuple(assets),
            values=values,
            provenance=ProvenanceRecord(
                op_name, encode_params(params), tuple(p.panel_id for p in inputs)
            ),
        )

    # -- introspection -----------------------------------------------------

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    def n_nonmissing(self) -> int:
        return int(np.count_nonzero(~np.isnan(self.values)))

    def payload(self) -> dict:
        """Summary handle passed around instead of full data (tool-call style)."""
        span = [self.dates[0], self.dates[-1]] if len(self.dates) else []
        return {
            "panel_id": self.panel_id,
            "n_dates": self.n_dates,
            "n_assets": self.n_assets,
            "n_nonmissing": self.n_nonmissing(),
            "date_span": span,
        }

    def cell(self, period: str, asset: str) -> float:
        i = self.dates.position(month_ordinal(period))
        if i is None:
            return float("nan")
        try:
            j = self.assets.index(asset)
        except ValueError:
            return float("nan")
        return float(self.values[i, j])

    def value_equal(self, other: "Panel") -> bool:
        """Exact equality of frame, missing mask, and non-missing values."""
        if self.dates != other.dates or self.assets != other.assets:
            return False
        a, b = self.values, other.values
        return bool(
            np.array_equal(np.isnan(a), np.isnan(b))
            and np.array_equal(a[~np.isnan(a)], b[~np.isnan(b)])
        )

    def is_series(self) -> bool:
        return self.n_assets == 1

    def to_series(self, name: str | None = None) -> "FactorSeries":
        if not self.is_series():
            raise DataError(f"panel {self.panel_id!r} has {self.n_assets} columns, expected 1")
        return FactorSeries(
            dates=self.dates,
            values=self.values[:, 0].copy(),
            name=name or self.panel_id or SERIES_ASSET,
        )


@dataclass(frozen=True)
class FactorSeries:
    """Per-date scalar series (factor returns, thresholds, turnover)."""

    dates: DateIndex
    values: np.ndarray
    name: str = SERIES_ASSET

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if vals.shape[0] != len(self.dates):
            raise DataError("series length does not match date index")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def to_panel(self, op_name="series", params=None, inputs=()) -> Panel:
        return Panel(
            panel_id="",
            dates=self.dates,
            assets=(SERIES_ASSET,),
            values=self.values.reshape(-1, 1),
            provenance=ProvenanceRecord(
                op_name, encode_params(params), tuple(p.panel_id for p in inputs)
            ),
        )

    def nonmissing(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def dropna(self) -> np.ndarray:
        return self.values[self.nonmissing()]


class PanelRegistry:
    """Session-scoped id -> Panel map. Registration is the single write path.

    Ids are never reused; provenance inputs must already be registered, which
    makes the provenance graph acyclic by construction. Registration is
    serialized with a lock; reads are safe to share.
    """

    def __init__(self):
        self._panels: dict[str, Panel] = {}
        self._counter = 1
        self._lock = threading.Lock()

    def __contains__(self, panel_id: str) -> bool:
        return panel_id in self._panels

    def __len__(self) -> int:
        return len(self._panels)

    def ids(self) -> list[str]:
        return list(self._panels)

    def get(self, panel_id: str) -> Panel:
        try:
            return self._panels[panel_id]
        except KeyError:
            raise RegistryError(f"unknown panel id {panel_id!r}") from None

    def register(self, panel: Panel, name: str | None = None) -> str:
        """Insert a panel, assign its id and sequence number, return the id.

        An explicit ``panel.panel_id`` must be unused. Unnamed panels take
        ``name`` when free, falling back to ``_<counter>``.
        """
        with self._lock:
            for input_id in panel.provenance.input_ids:
                if input_id not in self._panels:
                    raise RegistryError(
                        f"provenance input {input_id!r} is not registered"
                    )
            panel_id = panel.panel_id
            if panel_id:
                if panel_id in self._panels:
                    raise RegistryError(f"duplicate panel id {panel_id!r}")
            elif name and name not in self._panels:
                panel_id = name
            else:
                panel_id = f"_{self._counter}"
            if not _ID_RE.match(panel_id):
                raise RegistryError(f"invalid panel id {panel_id!r}")
            seq = self._counter
            self._counter += 1
            registered = replace(
                panel,
                panel_id=panel_id,
                provenance=replace(panel.provenance, created_seq=seq),
            )
            self._panels[panel_id] = registered
            return panel_id

    def _restore(self, panel: Panel) -> None:
        """Re-insert a persisted panel keeping its original sequence number."""
        with self._lock:
            if panel.panel_id in self._panels:
                raise RegistryError(f"duplicate panel id {panel.panel_id!r}")
            self._panels[panel.panel_id] = panel
            self._counter = max(self._counter, panel.provenance.created_seq + 1)


# -- persistence -----------------------------------------------------------


def save(panel: Panel, directory) -> list[Path]:
    """Write ``<id>.csv`` (long form, missing cells omitted) and ``<id>.meta.json``."""
    if not panel.panel_id:
        raise DataError("cannot save an unregistered panel without an id")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{panel.panel_id}.csv"
    meta_path = directory / f"{panel.panel_id}.meta.json"

    lines = ["date,asset,value"]
    vals = panel.values
    for i, period in enumerate(panel.dates):
        row = vals[i]
        for j, asset in enumerate(panel.assets):
            v = row[j]
            if not np.isnan(v):
                lines.append(f"{period},{asset},{float(v)!r}")
    csv_path.write_text("\n".join(lines) + "\n")

    span = [panel.dates[0], panel.dates[-1]] if len(panel.dates) else []
    meta = {
        "panel_id": panel.panel_id,
        "assets": list(panel.assets),
        "dates": list(panel.dates),
        "date_span": span,
        "provenance": panel.provenance.to_dict(),
    }
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return [csv_path, meta_path]


def load(directory, panel_id: str) -> Panel:
    """Rebuild a saved panel bit-exactly (values, missing mask, frame, provenance)."""
    directory = Path(directory)
    csv_path = directory / f"{panel_id}.csv"
    meta_path = directory / f"{panel_id}.meta.json"
    if not csv_path.exists():
        raise DataError(f"missing file {csv_path}")
    if not meta_path.exists():
        raise DataError(f"missing file {meta_path}")

    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{meta_path}: bad JSON: {exc}") from exc
    dates = DateIndex(meta["dates"])
    assets = tuple(meta["assets"])
    asset_pos = {a: j for j, a in enumerate(assets)}
    grid = np.full((len(dates), len(assets)), np.nan)

    text = csv_path.read_text().splitlines()
    if not text or text[0] != "date,asset,value":
        raise DataError(f"{csv_path}: expected header 'date,asset,value'")
    seen = set()
    for lineno, line in enumerate(text[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise DataError(f"{csv_path} line {lineno}: expected 3 fields")
        period, asset, raw = parts
        i = dates.position(month_ordinal(period))
        j = asset_pos.get(asset)
        if i is None or j is None:
            raise DataError(
                f"{csv_path} line {lineno}: cell ({period},{asset}) outside metadata frame"
            )
        if (i, j) in seen:
            raise DataError(f"{csv_path} line {lineno}: duplicate cell ({period},{asset})")
        seen.add((i, j))
        try:
            grid[i, j] = float(raw)
        except ValueError as exc:
            raise DataError(f"{csv_path} line {lineno}: bad value {raw!r}") from exc

    return Panel(
        panel_id=str(meta["panel_id"]),
        dates=dates,
        assets=assets,
        values=grid,
        provenance=ProvenanceRecord.from_dict(meta["provenance"]),
    )


def load_registry(directory) -> PanelRegistry:
    """Restore a registry from every saved panel in a directory."""
    directory = Path(directory)
    panels = []
    for meta_path in sorted(directory.glob("*.meta.json")):
        panel_id = meta_path.name[: -len(".meta.json")]
        panels.append(load(directory, panel_id))
    panels.sort(key=lambda p: p.provenance.created_seq)
    registry = PanelRegistry()
    for panel in panels:
        registry._restore(panel)
    return registry


# -- provenance graph ------------------------------------------------------


def export_graph(registry: PanelRegistry, root_id: str) -> tuple[dict, str]:
    """Transitive-input subgraph of ``root_id`` as (JSON document, DOT text).

    Nodes come out in topological order (inputs before outputs), which a
    walk ordered by registration sequence guarantees.
    """
    root = registry.get(root_id)

    reached = {}
    stack = [root]
    while stack:
        panel = stack.pop()
        if panel.panel_id in reached:
            continue
        reached[panel.panel_id] = panel
        for input_id in panel.provenance.input_ids:
            stack.append(registry.get(input_id))

    ordered = sorted(reached.values(), key=lambda p: p.provenance.created_seq)
    nodes = [
        {
            "id": p.panel_id,
            "op_name": p.provenance.op_name,
            "params": dict(p.provenance.params),
        }
        for p in ordered
    ]
    edges = [
        {"from": input_id, "to": p.panel_id}
        for p in ordered
        for input_id in p.provenance.input_ids
    ]
    doc = {"root": root_id, "nodes": nodes, "edges": edges}

    lines = ["digraph provenance {", "  rankdir=LR;"]
    for node in nodes:
        lines.append(f'  "{node["id"]}" [label="{node["id"]}\\n{node["op_name"]}"];')
    for edge in edges:
        lines.append(f'  "{edge["from"]}" -> "{edge["to"]}";')
    lines.append("}")
    return doc, "\n".join(lines) + "\n"


def topological_order(doc: dict) -> list[str]:
    """Kahn topological sort of a graph document; raises on cycles."""
    ids = [n["id"] for n in doc["nodes"]]
    indeg = {i: 0 for i in ids}
    out: dict[str, list[str]] = {i: [] for i in ids}
    for e in doc["edges"]:
        indeg[e["to"]] += 1
        out[e["from"]].append(e["to"])
    ready = [i for i in ids if indeg[i] == 0]
    order = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        for succ in out[node]:
            indeg[succ] -= 1
            if indeg[succ] == 0:
                ready.append(succ)
    if len(order) != len(ids):
        raise DataError("provenance graph contains a cycle")
    return order
