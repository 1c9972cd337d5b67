"""Shared fixtures and the acceptance-summary reporter.

Tests in ``test_acceptance.py`` each carry a one-line docstring naming the
behavior they gate; this conftest collects their outcomes and prints one
``PASS``/``FAIL`` line per criterion at the end of the run, so the gate is
readable straight off the terminal.
"""

from __future__ import annotations

import numpy as np
import pytest

from mudikit import Image, Mask, RandomSource, SegmentedSubject
from mudikit.sandbox import SpriteSpec, gen_sprites

_acceptance_results: list[tuple[str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if not str(item.fspath).endswith("test_acceptance.py"):
        return
    label = (item.function.__doc__ or item.name).strip().splitlines()[0]
    if report.when == "call":
        _acceptance_results.append((label, "PASS" if report.passed else "FAIL"))
    elif report.when == "setup" and not report.passed:
        _acceptance_results.append((label, "FAIL"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for label, verdict in _acceptance_results:
        terminalreporter.write_line(f"{verdict}  {label}")


def make_subject(
    height: int,
    width: int,
    color: tuple[float, float, float],
    identifier: str,
    class_text: str,
    *,
    mask_rows: slice | None = None,
    mask_cols: slice | None = None,
) -> SegmentedSubject:
    """A constant-color subject with a rectangular (default: full) mask."""
    data = np.zeros((height, width, 3))
    mask = np.zeros((height, width), dtype=np.uint8)
    rows = mask_rows if mask_rows is not None else slice(0, height)
    cols = mask_cols if mask_cols is not None else slice(0, width)
    mask[rows, cols] = 1
    data[mask == 1] = color
    return SegmentedSubject(
        image=Image(height, width, 3, data),
        mask=Mask(height, width, mask),
        identifier=identifier,
        class_text=class_text,
    )


@pytest.fixture
def subject_pair() -> list[SegmentedSubject]:
    """Two 6x6 constant-color subjects with full masks."""
    return [
        make_subject(6, 6, (0.8, 0.1, 0.1), "subject-a", "disk"),
        make_subject(6, 6, (0.1, 0.1, 0.8), "subject-b", "square"),
    ]


@pytest.fixture(scope="session")
def sprite_pair() -> list[SegmentedSubject]:
    """The disk/square pair the sampling experiments run on.

    Sizes 24 and 22 on a 32x32 canvas keep the subjects wide enough that the
    factor-8 latent grid still sees them after nearest-neighbor mask resize.
    """
    specs = [
        SpriteSpec(canvas=(32, 32), shape="disk", color=(0.9, 0.2, 0.1), size=24, identity="sprite-a"),
        SpriteSpec(canvas=(32, 32), shape="square", color=(0.1, 0.3, 0.9), size=22, identity="sprite-b"),
    ]
    return gen_sprites(specs, RandomSource(42))
