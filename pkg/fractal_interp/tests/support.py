import json
import shutil
import tempfile
from pathlib import Path

import numpy as np

from fractal_interp.alpha_fractal import BaseFunction, SeedFunction
from fractal_interp.domain_grid import build_grid


def square(points):
    return points[:, 0] ** 2


def identity_x1(points):
    return points[:, 0]


DESK_GRID_KNOTS = [[0.0, 0.5, 1.0]]


def desk_grid():
    return build_grid(DESK_GRID_KNOTS)


def desk_seed():
    return SeedFunction(square, label='x1^2')


def desk_base():
    return BaseFunction(identity_x1, label='x1')


def random_grid(rng, n, max_cells=3):
    """Random non-uniform grid with 2..max_cells cells per axis, roughly unit width"""
    knot_lists = []
    for _ in range(n):
        cells = int(rng.integers(2, max_cells + 1))
        widths = rng.uniform(0.5, 1.5, cells) / cells
        start = rng.uniform(-0.5, 0.5)
        knot_lists.append(np.concatenate([[start], start + np.cumsum(widths)]).tolist())
    return build_grid(knot_lists)


def uniform_grid(n, cells=2):
    return build_grid([np.linspace(0.0, 1.0, cells + 1).tolist() for _ in range(n)])


class TempDirMixin:
    """Fresh temporary directory per test with a config writer"""

    def setUp(self):
        super().setUp()
        self.tmp = Path(tempfile.mkdtemp(prefix='fif-test-'))
        self.addCleanup(shutil.rmtree, self.tmp, True)

    def write_config(self, payload, name='run.json'):
        path = self.tmp / name
        path.write_text(json.dumps(payload))
        return path
