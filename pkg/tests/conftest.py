import pytest

from igacontact.scene import SceneConfig, build_scene
from igacontact.solver import run_load_steps

from .acceptance_report import LINES


@pytest.fixture(scope="session")
def reference_run():
    """The 100-step reference scene at 4 inserted knots, with contact pairs kept."""
    scene = build_scene(SceneConfig())
    history = run_load_steps(scene, keep_pairs=True)
    return scene, history


def pytest_terminal_summary(terminalreporter):
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
