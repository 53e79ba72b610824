from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factorlab import panel as panelio
from factorlab.errors import DataError, RegistryError
from factorlab.panel import (
    DateIndex,
    Panel,
    PanelRegistry,
    ProvenanceRecord,
    export_graph,
    month_ordinal,
    ordinal_to_period,
    topological_order,
)

from .conftest import make_panel


class TestDateIndex:
    def test_ordering_enforced(self):
        with pytest.raises(DataError):
            DateIndex(["1990-02", "1990-01"])
        with pytest.raises(DataError):
            DateIndex(["1990-01", "1990-01"])

    def test_gaps_allowed(self):
        idx = DateIndex(["1990-01", "1990-03"])
        assert len(idx) == 2
        assert idx.position(month_ordinal("1990-02")) is None

    def test_month_arithmetic_round_trip(self):
        for period in ("1990-01", "1999-12", "2023-07"):
            assert ordinal_to_period(month_ordinal(period)) == period

    def test_bad_period(self):
        with pytest.raises(DataError):
            DateIndex(["1990-13"])
        with pytest.raises(DataError):
            DateIndex(["199001"])


class TestRegistry:
    def test_register_source(self):
        reg = PanelRegistry()
        p = make_panel("A", ["1990-01"], ["x"], [[1.0]])
        assert reg.register(p) == "A"
        assert len(reg) == 1

    def test_register_with_valid_edge(self):
        reg = PanelRegistry()
        a = make_panel("A", ["1990-01"], ["x"], [[1.0]])
        reg.register(a)
        derived = Panel.derive("unary_op", {"op": "neg"}, [reg.get("A")],
                               a.dates, a.assets, -a.values)
        pid = reg.register(derived, name="B")
        assert pid == "B"
        assert reg.get("B").provenance.input_ids == ("A",)

    def test_dangling_input_rejected(self):
        reg = PanelRegistry()
        orphan = Panel(
            panel_id="B",
            dates=DateIndex(["1990-01"]),
            assets=("x",),
            values=np.array([[1.0]]),
            provenance=ProvenanceRecord("unary_op", {}, ("Z",)),
        )
        with pytest.raises(RegistryError, match="Z"):
            reg.register(orphan)

    def test_duplicate_id_rejected(self):
        reg = PanelRegistry()
        reg.register(make_panel("A", ["1990-01"], ["x"], [[1.0]]))
        with pytest.raises(RegistryError, match="duplicate"):
            reg.register(make_panel("A", ["1990-01"], ["x"], [[2.0]]))

    def test_unnamed_panels_get_counter_ids(self):
        reg = PanelRegistry()
        reg.register(make_panel("A", ["1990-01"], ["x"], [[1.0]]))
        derived = Panel.derive("unary_op", {}, [reg.get("A")],
                               reg.get("A").dates, ("x",), np.array([[2.0]]))
        assert reg.register(derived) == "_2"

    def test_immutability(self):
        reg = PanelRegistry()
        reg.register(make_panel("A", ["1990-01"], ["x"], [[1.0]]))
        with pytest.raises(ValueError):
            reg.get("A").values[0, 0] = 5.0


class TestSaveLoad:
    def test_missing_cells_omitted(self, tmp_path):
        p = make_panel("P", ["1990-01", "1990-02"], ["a", "b"],
                       [[1.0, None], [2.0, 3.0]])
        csv_path, meta_path = panelio.save(p, tmp_path)
        rows = csv_path.read_text().strip().splitlines()
        assert rows[0] == "date,asset,value"
        assert len(rows) == 4  # three values, one missing cell omitted
        meta = json.loads(meta_path.read_text())
        assert meta["panel_id"] == "P"
        assert meta["dates"] == ["1990-01", "1990-02"]

    def test_round_trip_identity(self, tmp_path):
        p = make_panel("P", ["1990-01", "1990-03"], ["a", "b"],
                       [[1.25, None], [-3.5e-7, 0.1]])
        panelio.save(p, tmp_path)
        loaded = panelio.load(tmp_path, "P")
        assert loaded.value_equal(p)
        assert loaded.panel_id == "P"
        # and the re-saved bytes are identical
        again = tmp_path / "again"
        panelio.save(loaded, again)
        assert (again / "P.csv").read_text() == (tmp_path / "P.csv").read_text()

    def test_provenance_preserved(self, tmp_path):
        reg = PanelRegistry()
        a = make_panel("A", ["1990-01"], ["x"], [[1.0]])
        b = make_panel("B", ["1990-01"], ["x"], [[2.0]])
        reg.register(a)
        reg.register(b)
        derived = Panel.derive("binary_op", {"op": "add"},
                               [reg.get("A"), reg.get("B")],
                               a.dates, a.assets, np.array([[3.0]]))
        pid = reg.register(derived, name="SUM")
        panelio.save(reg.get(pid), tmp_path)
        meta = json.loads((tmp_path / "SUM.meta.json").read_text())
        assert meta["provenance"]["input_ids"] == ["A", "B"]

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="missing file"):
            panelio.load(tmp_path, "NOPE")

    def test_load_rejects_cell_outside_frame(self, tmp_path):
        p = make_panel("P", ["1990-01"], ["a"], [[1.0]])
        panelio.save(p, tmp_path)
        csv_path = tmp_path / "P.csv"
        csv_path.write_text(csv_path.read_text() + "1990-02,a,9.0\n")
        with pytest.raises(DataError, match="outside metadata frame"):
            panelio.load(tmp_path, "P")

    def test_load_registry_restores_sequence(self, tmp_path):
        reg = PanelRegistry()
        a = make_panel("A", ["1990-01"], ["x"], [[1.0]])
        reg.register(a)
        derived = Panel.derive("unary_op", {"op": "neg"}, [reg.get("A")],
                               a.dates, a.assets, -a.values)
        reg.register(derived, name="B")
        for pid in ("A", "B"):
            panelio.save(reg.get(pid), tmp_path)
        restored = panelio.load_registry(tmp_path)
        assert set(restored.ids()) == {"A", "B"}
        assert restored.get("B").provenance.created_seq == 2


class TestExportGraph:
    def test_source_only(self):
        reg = PanelRegistry()
        reg.register(make_panel("A", ["1990-01"], ["x"], [[1.0]]))
        doc, dot = export_graph(reg, "A")
        assert len(doc["nodes"]) == 1
        assert doc["edges"] == []
        assert '"A"' in dot

    def test_chain(self):
        reg = PanelRegistry()
        a = make_panel("A", ["1990-01"], ["x"], [[1.0]])
        reg.register(a)
        b = Panel.derive("unary_op", {"op": "neg"}, [reg.get("A")],
                         a.dates, a.assets, -a.values)
        reg.register(b, name="B")
        c = Panel.derive("unary_op", {"op": "abs"}, [reg.get("B")],
                         a.dates, a.assets, np.abs(a.values))
        reg.register(c, name="C")
        doc, _ = export_graph(reg, "C")
        assert [n["id"] for n in doc["nodes"]] == ["A", "B", "C"]
        assert len(doc["edges"]) == 2
        assert topological_order(doc) == ["A", "B", "C"]

    def test_unknown_root(self):
        reg = PanelRegistry()
        with pytest.raises(RegistryError):
            export_graph(reg, "missing")


@settings(max_examples=40, deadline=None)
@given(
    values=st.lists(
        st.lists(
            st.one_of(st.none(), st.floats(-1e6, 1e6, allow_nan=False)),
            min_size=3, max_size=3,
        ),
        min_size=1, max_size=6,
    )
)
def test_save_load_round_trip_property(values, tmp_path_factory):
    tmp = tmp_path_factory.mktemp("rt")
    periods = [f"1990-{m + 1:02d}" for m in range(len(values))]
    p = make_panel("RT", periods, ["a", "b", "c"], values)
    panelio.save(p, tmp)
    assert panelio.load(tmp, "RT").value_equal(p)
