"""Shared fixtures: synthetic batches, hand-built scenes, fake detector child."""

import os
import sys

import numpy as np
import pytest

from sspatch.dataset import AnnotatedScene, generate_synthetic
from sspatch.detector import DetectorConfig
from sspatch.geometry import BoundingBox
from sspatch.image import quantize

LINE_SERVER = os.path.join(os.path.dirname(__file__), "helpers", "line_server.py")


@pytest.fixture(scope="session")
def scenes100():
    return generate_synthetic(100, seed=0)


@pytest.fixture(scope="session")
def scenes12():
    return generate_synthetic(12, seed=3)


@pytest.fixture
def toy_cfg():
    return DetectorConfig()


def make_solid_scene(
    scene_id="hand-0",
    size=(160, 120),
    box=BoundingBox(45, 30, 30, 100),
    body=0.8,
    bg=0.1,
):
    """Single flat warm rectangle on a cold background; toy detector scores 1.0."""
    h, w = size
    img = np.full((h, w), bg, dtype=np.float64)
    img[int(box.y) : int(box.y2), int(box.x) : int(box.x2)] = body
    return AnnotatedScene(id=scene_id, image=quantize(img), persons=[box])


@pytest.fixture
def solid_scene():
    return make_solid_scene


@pytest.fixture
def line_server():
    """Command-line factory for the fake protocol child."""

    def cmd(mode="fixed", name="fake-detector"):
        return [sys.executable, LINE_SERVER, "--mode", mode, "--name", name]

    return cmd
