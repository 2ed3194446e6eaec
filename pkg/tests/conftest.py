from pathlib import Path

import pytest

FIXTURES = Path(__file__).resolve().parent / "fixtures"
SCENE_NAMES = ("scene0000_00", "scene0001_00")


@pytest.fixture(scope="session")
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def scene_dirs() -> list[Path]:
    return [FIXTURES / "scenes" / n for n in SCENE_NAMES]


@pytest.fixture(scope="session")
def scene0(scene_dirs):
    from spargen.scene import load_scene_manifest

    return load_scene_manifest(scene_dirs[0])


@pytest.fixture(scope="session")
def records0(scene0):
    from spargen.config import build_config
    from spargen.pipeline import kept_frames
    from spargen.visibility import build_records

    cfg = build_config(env={})
    return build_records(scene0, kept_frames(scene0, cfg), cfg.visibility)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Record one PASS/FAIL line per acceptance criterion."""

    def log(n: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
