"""Seeded instance suites shared by the property and acceptance tests."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from linregions import generate_random_network, tighten_bounds

SUITE_SIZE = 50
MAX_UNSTABLE = 14
SHAPES = ([6, 5], [5, 5, 4], [8, 6], [6, 5, 4], [10], [4, 4, 4], [7, 5])


@lru_cache(maxsize=None)
def network_suite(size: int = SUITE_SIZE, method: str = "milp"):
    """``size`` networks with n0 in {2, 3} and at most 14 unstable units, plus their bounds."""
    out = []
    seed = 0
    while len(out) < size:
        shape = SHAPES[seed % len(SHAPES)]
        n0 = 2 + (seed // len(SHAPES)) % 2
        net = generate_random_network(shape, n0, seed=1000 + seed)
        ub = tighten_bounds(net, method)
        if 1 <= ub.n_unstable <= MAX_UNSTABLE:
            out.append((seed, net, ub))
        seed += 1
    return tuple(out)


def relaxation_contains(H, Hbar, g, h, tol=0.0):
    """Is there a z in [0, 1] (and hbar >= 0) completing (g, h) in the big-M relaxation?"""
    g, h = np.asarray(g, float), np.asarray(h, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        zlo = np.where(H > 0, h / H, np.where(h > tol, np.inf, 0.0))
        zhi = np.where(Hbar > 0, 1.0 - (h - g) / Hbar, np.where(h - g > tol, -np.inf, 1.0))
    zlo = np.maximum(zlo, 0.0)
    zhi = np.minimum(zhi, 1.0)
    return (h >= -tol) & (h - g >= -tol) & (zlo <= zhi + tol)


ACCEPTANCE: dict[int, str] = {}


class criterion:
    """Record a PASS/FAIL line for acceptance criterion ``number``; printed in the summary."""

    def __init__(self, number: int, title: str):
        self.number, self.title, self.detail = number, title, ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        verdict = "PASS" if exc_type is None else "FAIL"
        line = f"criterion {self.number} [{verdict}] {self.title}: {self.detail}"
        if exc is not None and not self.detail:
            line += f"{exc_type.__name__}: {exc}"
        ACCEPTANCE[self.number] = line
        print(line)
        return False
