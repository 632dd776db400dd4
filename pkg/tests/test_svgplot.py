import xml.etree.ElementTree as ET

import numpy as np

from adaptrhc.sim import TrajectoryLog
from adaptrhc.svgplot import figure_paths, nice_ticks, write_run_plots


def test_ticks():
    assert nice_ticks(0, 100) == [0, 20, 40, 60, 80, 100]
    assert nice_ticks(0.0, 1.3, 5) == [0.0, 0.5, 1.0]
    assert nice_ticks(-0.3, 0.3, 4) == [-0.2, 0.0, 0.2]
    assert nice_ticks(1.0, 1.0) == [1.0]


def test_figure_paths(tmp_path):
    paths = figure_paths(tmp_path / "run.svg")
    assert [p.name for p in paths.values()] == ["run_states.svg", "run_controls.svg", "run_estimates.svg"]


def test_plots_are_well_formed(tmp_path):
    log = TrajectoryLog(3, 2, 50)
    for k in range(50):
        v = np.array([k, np.sin(k), 2.0])
        u = np.array([1.0, np.inf if k == 10 else 0.0, -1.0])
        log.append(k * 0.1, v, v + 1, u, [k, 1.0], [1.0, 1.0], 0.0, 0.0, 0.0)
    paths = write_run_plots(log, tmp_path / "p.svg", ("s", "k"), "demo")
    for p in paths:
        root = ET.parse(p).getroot()
        assert root.tag.endswith("svg")
        assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) >= 2
    assert "s estimate" in paths[2].read_text()
