from __future__ import annotations

import numpy as np
import pytest

from factorlab.ingest import ingest_dataset
from factorlab.panel import DateIndex, Panel
from factorlab.synthetic import GeneratorConfig, generate_synthetic

# the oracle-equivalence dataset: seed 42, 50 assets, 120 months, 40% NYSE,
# with planted spreads and sparse missing returns to exercise renormalization
ORACLE_CONFIG = GeneratorConfig(
    seed=42,
    n_assets=50,
    n_months=120,
    start_month="1990-01",
    fraction_nyse=0.4,
    mom_spread=0.002,
    val_spread=0.003,
    missing_ret_rate=0.02,
)


def make_panel(panel_id, periods, assets, rows) -> Panel:
    grid = np.array(
        [[np.nan if v is None else float(v) for v in row] for row in rows]
    )
    return Panel.source(panel_id, DateIndex(periods), tuple(assets), grid)


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synthetic")
    generate_synthetic(ORACLE_CONFIG, out)
    return out


@pytest.fixture(scope="session")
def source_panels(synthetic_dir):
    result = ingest_dataset(synthetic_dir / "monthly.csv", synthetic_dir / "annual.csv")
    return result.panels
