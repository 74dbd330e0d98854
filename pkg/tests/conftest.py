"""Shared fixtures: small procedural scenes and their indexes."""

import numpy as np
import pytest

from src.geometry.spatial_index import build_spatial_index
from src.utils import scenes


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def flat_mesh():
    """10 m x 10 m floor at z = 0, normal up."""
    return scenes.flat_site(10.0)


@pytest.fixture
def flat_index(flat_mesh):
    return build_spatial_index(flat_mesh)


@pytest.fixture
def sphere_mesh():
    return scenes.uv_sphere(1.0, n_lat=24, n_lon=48)


@pytest.fixture
def sphere_index(sphere_mesh):
    return build_spatial_index(sphere_mesh)


@pytest.fixture
def unit_box():
    return scenes.box_solid((0, 0, 0), (1, 1, 1))
