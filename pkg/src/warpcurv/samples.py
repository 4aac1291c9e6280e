"""Seeded random smooth data for property sweeps and the verify command."""

from __future__ import annotations

import numpy as np

from .bcwp import BcwpFunctions, BcwpSpec
from .geometry import ChartGrid

__all__ = ["random_wave", "random_metric_entries", "random_bcwp_spec"]


def random_wave(rng: np.random.Generator, dim: int, amp: float = 0.3):
    """x -> amp * sin(w . x + phase) with O(1) frequencies."""
    w = rng.uniform(-1.5, 1.5, dim)
    phase = rng.uniform(0, 2 * np.pi)
    a = float(rng.uniform(0.5, 1.0) * amp)

    def f(*x):
        return a * np.sin(sum(wi * xi for wi, xi in zip(w, x)) + phase)

    return f


def random_metric_entries(rng: np.random.Generator, dim: int, sign: int = 1):
    """Diagonally dominant symmetric entries; sign = -1 flips the whole block."""
    diag = [random_wave(rng, dim, 0.2) for _ in range(dim)]
    base = rng.uniform(1.0, 1.5, dim)
    entries = [[0.0] * dim for _ in range(dim)]
    for i in range(dim):
        entries[i][i] = (lambda *x, i=i: sign * (base[i] + diag[i](*x)))
        for j in range(i + 1, dim):
            off = random_wave(rng, dim, 0.1)
            entries[i][j] = entries[j][i] = (lambda *x, off=off: sign * off(*x))
    return entries


def random_bcwp_spec(rng: np.random.Generator, m: int, k: int, h: float = 1e-2, count: int = 9,
                     base_sign: int = 1, fiber_sign: int = 1) -> BcwpSpec:
    bnames = [f"x{i + 1}" for i in range(m)]
    fnames = [f"y{i + 1}" for i in range(k)]
    bg = ChartGrid.centered(bnames, rng.uniform(-0.5, 0.5, m), h, count)
    fg = ChartGrid.centered(fnames, rng.uniform(-0.5, 0.5, k), h, count)
    cw, ww = random_wave(rng, m), random_wave(rng, m)
    fns = BcwpFunctions(random_metric_entries(rng, m, base_sign), random_metric_entries(rng, k, fiber_sign),
                        lambda *x: np.exp(cw(*x)), lambda *x: np.exp(ww(*x)))
    return BcwpSpec.from_functions(bg, fg, fns)
