"""Shared helpers for the test suite."""

import numpy as np
import pytest

from stam.grid import OccupancyGrid, Pose, ScalarField


def make_grid(width=10, height=10, resolution=0.1, origin=Pose(0.0, 0.0), occupied=None):
    """A small occupancy grid, all free unless an occupancy mask is given."""
    if occupied is None:
        occupied = np.zeros((height, width), dtype=bool)
    return OccupancyGrid(width, height, resolution, origin, occupied)


def make_field(values, resolution=1.0, origin=Pose(0.0, 0.0)):
    """Wrap a 2D array (row, col) as a scalar field."""
    values = np.asarray(values, dtype=np.float64)
    return ScalarField(values.shape[1], values.shape[0], resolution, origin, values)


def random_spd(rng, d, eig_low=0.2, eig_high=1.5):
    """Random symmetric positive definite matrix with bounded eigenvalues."""
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    eigs = rng.uniform(eig_low, eig_high, size=d)
    return q @ np.diag(eigs) @ q.T


@pytest.fixture
def rng():
    return np.random.default_rng(0)
