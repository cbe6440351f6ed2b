import json
from pathlib import Path

import pytest

from steersim.biphoton import EnergyEntangledSource
from steersim.geometry import Layout
from steersim.spectra import FrequencyGrid

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SIGMA_PM = 1e13
PUMP = 4.65e15
OMEGA0 = PUMP / 2


def source_grid(min_feature=SIGMA_PM / 20):
    return FrequencyGrid.around(OMEGA0, 8 * SIGMA_PM, min_feature)


def cw_source(grid=None):
    grid = source_grid() if grid is None else grid
    return EnergyEntangledSource(PUMP, 0.0, OMEGA0, SIGMA_PM, grid)


def desk_layout(path_s_f=10.0, c=3e8):
    return Layout(path_s_bd=27.0, dist_f_bd=12.0, path_s_f=path_s_f, path_s_ad=path_s_f,
                  light_speed=c)


def load_json(name):
    return json.loads((CONFIGS / name).read_text())


def write_config(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data, indent=2))
    return p


@pytest.fixture
def source():
    return cw_source()


@pytest.fixture
def layout():
    return desk_layout()


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion."""
    def _report(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
