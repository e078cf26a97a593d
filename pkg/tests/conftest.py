import shutil

import pytest

from poseveil import project as project_mod
from poseveil.synth import build_fixture


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    rows = []
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" in nodeid and getattr(rep, "when", "call") == "call":
                rows.append((nodeid.split("::")[-1], status == "passed"))
    if rows:
        terminalreporter.section("acceptance criteria")
        for name, ok in sorted(rows):
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")


@pytest.fixture(scope="session")
def fixture_input(tmp_path_factory):
    """The bundled 60-frame synthetic input, built once per session."""
    root = tmp_path_factory.mktemp("fixture_input")
    build_fixture(root)
    return root


@pytest.fixture(scope="session")
def completed_project(tmp_path_factory, fixture_input):
    """A project that has run the full pipeline on the fixture."""
    root = tmp_path_factory.mktemp("proj")
    proj = project_mod.create_project(
        "demo",
        root,
        [
            {
                "stem": "clinic01",
                "pose_dir": fixture_input / "clinic01_poses",
                "frames_dir": fixture_input / "clinic01_frames",
            }
        ],
    )
    proj.run()
    return proj


@pytest.fixture()
def project_copy(completed_project, tmp_path):
    """A throwaway deep copy of the completed project for mutation tests."""
    dest = tmp_path / "demo"
    shutil.copytree(completed_project.directory, dest)
    return project_mod.load_project(dest)
