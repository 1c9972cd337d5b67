"""Shared fixtures for the adapter tests."""

from __future__ import annotations

from pathlib import Path

import pytest

from mudikit.io import save_image_png

from corpus import blob_image, dark_image


@pytest.fixture()
def shots(tmp_path) -> Path:
    """Two readable images: 'alpha' with two blobs, 'beta' with none."""
    directory = tmp_path / "shots"
    directory.mkdir()
    save_image_png(blob_image(), directory / "alpha.png")
    save_image_png(dark_image(), directory / "beta.png")
    return directory
