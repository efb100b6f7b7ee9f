"""Shared seeded tracking batteries for the shipped case-study configs.

The closed-loop runs are expensive (about 45 s per 200-CPI scenario), so
each battery executes once per session and is consumed by both the filter
consistency tests and the acceptance suite.
"""

import dataclasses
import time
from pathlib import Path

import pytest

from nearbeam.config import load_config
from nearbeam.harness import run_nfpb

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def run_battery(config_name, seeds):
    """Run one scenario per seed; keep only per-run metrics and wall time."""
    cfg0 = load_config(str(CONFIG_DIR / config_name))
    out = []
    for seed in seeds:
        cfg = dataclasses.replace(cfg0, run=dataclasses.replace(cfg0.run, seed=seed))
        t0 = time.perf_counter()
        records, metrics, lost = run_nfpb(cfg)
        out.append(
            {
                "seed": seed,
                "metrics": metrics,
                "lost": lost,
                "wall_s": time.perf_counter() - t0,
            }
        )
    return out


@pytest.fixture(scope="session")
def arc_battery_10():
    """10 seeded runs of the arc case study (seeds 0..9, full 200 CPIs)."""
    return run_battery("case_study.cfg", range(10))


@pytest.fixture(scope="session")
def arc_battery_50(arc_battery_10):
    """Seeds 0..49 of the arc case study; extends the 10-seed battery."""
    return arc_battery_10 + run_battery("case_study.cfg", range(10, 50))


@pytest.fixture(scope="session")
def line_battery():
    """10 seeded runs of the straight-line case study."""
    return run_battery("case_study_line.cfg", range(10))


@pytest.fixture(scope="session")
def spiral_battery():
    """10 seeded runs of the spiral case study."""
    return run_battery("case_study_spiral.cfg", range(10))
