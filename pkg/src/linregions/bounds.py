"""Analytical upper bounds on the number of linear regions.

All counts are Python integers; MAPS values are only taken when reporting.
The per-layer tables ``active_cap[k]`` and ``unstable_cap[k]`` bound how many
units of a layer can be active, respectively unstable, inside a region in
which ``k`` units of the previous layer are active.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

from .formulation import Leaning, Stability, UnitBounds
from .model import NetworkModel, maps

DEFAULT_EXACT_K_CAP = 20


@dataclass
class LayerActivityProfile:
    """Activity and instability caps of one layer (``layer`` is 1-based)."""

    layer: int
    width: int
    n_stable_active: int
    active_leaning: frozenset[int]
    inactive_leaning: frozenset[int]
    pos_support: dict[int, frozenset[int]]
    neg_support: dict[int, frozenset[int]]
    may_flip: list[frozenset[int]]
    may_activate: list[frozenset[int]]
    active_cap: list[int]
    unstable_cap: list[int]
    exact: list[bool]
    greedy_active_cover: list[int] | None = None
    greedy_unstable_cover: list[int] | None = None

    @property
    def n_unstable(self) -> int:
        return len(self.active_leaning) + len(self.inactive_leaning)

    def caps(self, k: int) -> tuple[int, int]:
        """``(active_cap, unstable_cap)`` for ``k`` active upstream units (clipped to the table)."""
        k = min(max(k, 0), len(self.active_cap) - 1)
        return self.active_cap[k], self.unstable_cap[k]

    def to_dict(self) -> dict:
        return {
            "layer": self.layer,
            "width": self.width,
            "n_stable_active": self.n_stable_active,
            "n_active_leaning": len(self.active_leaning),
            "n_inactive_leaning": len(self.inactive_leaning),
            "active_cap": list(self.active_cap),
            "unstable_cap": list(self.unstable_cap),
            "exact": list(self.exact),
            "greedy_active_cover": self.greedy_active_cover,
            "greedy_unstable_cover": self.greedy_unstable_cover,
        }


# --------------------------------------------------------------------------
# max k-coverage

def _popcount(x: int) -> int:
    return bin(x).count("1")


def max_coverage_table(sets: Sequence[int], k_max: int) -> list[int]:
    """Exact ``max |union of <= k sets|`` for ``k = 0..k_max``, sets given as bitmasks.

    Branch-and-bound over subsets in decreasing-size order. Values are
    filled up to saturation (the size of the full union) and repeated after.
    """
    sets = sorted((s for s in sets if s), key=_popcount, reverse=True)
    full = 0
    for s in sets:
        full |= s
    full_size = _popcount(full)
    table = [0]
    best_prev = 0
    for k in range(1, k_max + 1):
        if best_prev == full_size:
            table.append(full_size)
            continue
        best = best_prev

        def dfs(start, covered, left):
            nonlocal best
            size = _popcount(covered)
            if size > best:
                best = size
            if left == 0 or best == full_size:
                return
            gains = sorted((_popcount(sets[i] & ~covered) for i in range(start, len(sets))),
                           reverse=True)
            if size + sum(gains[:left]) <= best:
                return
            for i in range(start, len(sets)):
                if sets[i] & ~covered:
                    dfs(i + 1, covered | sets[i], left - 1)
                    if best == full_size:
                        return

        dfs(0, 0, k)
        table.append(best)
        best_prev = best
    return table


def greedy_coverage_table(sets: Sequence[int], k_max: int) -> list[int]:
    """Greedy max-coverage value for every ``k``, within ``1 - 1/e`` of the optimum."""
    covered = 0
    table = [0]
    remaining = [s for s in sets if s]
    for _ in range(k_max):
        gain, pick = 0, -1
        for idx, s in enumerate(remaining):
            g = _popcount(s & ~covered)
            if g > gain:
                gain, pick = g, idx
        if pick >= 0:
            covered |= remaining.pop(pick)
        table.append(_popcount(covered))
    return table


# --------------------------------------------------------------------------
# profiles

def _mask(indices) -> int:
    m = 0
    for i in indices:
        m |= 1 << i
    return m


def build_profiles(net: NetworkModel, ub: UnitBounds,
                   exact_k_cap: int = DEFAULT_EXACT_K_CAP) -> list[LayerActivityProfile]:
    """Activity/instability tables for every layer.

    The first layer sees the raw input, whose sign is not fixed, so it
    gets the trivial caps. Deeper layers use the weight-sign supports:
    an inactive-leaning unit can only switch on through a positive weight
    from an active upstream unit and an active-leaning unit can only switch
    off through a negative one. Stably inactive upstream units never take
    part. When the upstream layer is wider than ``exact_k_cap`` the
    trivial caps are used and the greedy cover is kept for diagnostics.
    """
    ub.check(net)
    profiles = []
    prev_width = net.input_dim
    for l, layer in enumerate(net.layers):
        st = ub.stability[l]
        le = ub.leaning[l]
        n_plus = sum(1 for s in st if s is Stability.STABLY_ACTIVE)
        u_plus = frozenset(i for i, v in enumerate(le) if v is Leaning.ACTIVE_LEANING)
        u_minus = frozenset(i for i, v in enumerate(le) if v is Leaning.INACTIVE_LEANING)
        n_u = len(u_plus) + len(u_minus)
        W = layer.weights
        pos = {i: frozenset(int(j) for j in range(prev_width) if W[i, j] > 0) for i in u_minus}
        neg = {i: frozenset(int(j) for j in range(prev_width) if W[i, j] < 0) for i in u_plus}
        flip = [frozenset([i for i in u_plus if j in neg[i]] + [i for i in u_minus if j in pos[i]])
                for j in range(prev_width)]
        activate = [frozenset(i for i in u_minus if j in pos[i]) for j in range(prev_width)]
        trivial_a, trivial_i = n_plus + n_u, n_u
        greedy_a = greedy_i = None
        if l == 0:
            size = prev_width + 1
            a_tab = [trivial_a] * size
            i_tab = [trivial_i] * size
            exact = [False] * size
        else:
            live = [j for j in range(prev_width)
                    if ub.stability[l - 1][j] is not Stability.STABLY_INACTIVE]
            flip_masks = [_mask(flip[j]) for j in live]
            act_masks = [_mask(activate[j]) for j in live]
            if prev_width <= exact_k_cap:
                cov_i = max_coverage_table(flip_masks, prev_width)
                cov_a = max_coverage_table(act_masks, prev_width)
                a_tab = [n_plus + len(u_plus) + c for c in cov_a]
                i_tab = list(cov_i)
                exact = [True] * (prev_width + 1)
            else:
                greedy_i = greedy_coverage_table(flip_masks, prev_width)
                greedy_a = greedy_coverage_table(act_masks, prev_width)
                a_tab = [trivial_a] * (prev_width + 1)
                i_tab = [trivial_i] * (prev_width + 1)
                a_tab[0], i_tab[0] = n_plus + len(u_plus), 0
                exact = [False] * (prev_width + 1)
                exact[0] = True
        profiles.append(LayerActivityProfile(
            l + 1, layer.width, n_plus, u_plus, u_minus, neg, pos, flip, activate,
            a_tab, i_tab, exact, greedy_a, greedy_i))
        prev_width = layer.width
    return profiles


def trivial_profiles(widths: Sequence[int], n0: int) -> list[LayerActivityProfile]:
    """Profiles in which every unit is unstable and may be active, for any upstream activity."""
    out = []
    prev = n0
    for l, n in enumerate(widths):
        size = prev + 1
        out.append(LayerActivityProfile(
            l + 1, n, 0, frozenset(range(n)), frozenset(), {}, {}, [], [],
            [n] * size, [n] * size, [False] * size))
        prev = n
    return out


# --------------------------------------------------------------------------
# bound evaluation

def _layer_sum(n: int, cap: int) -> int:
    return sum(math.comb(n, j) for j in range(min(n, cap) + 1))


def empirical_upper_bound(profiles: Sequence[LayerActivityProfile], n0: int) -> int:
    """Evaluate the nested region recursion from ``(layer 1, n0 active, dimension n0)``."""
    L = len(profiles)
    if L == 0:
        return 1

    @lru_cache(maxsize=None)
    def R(l: int, k: int, d: int) -> int:
        a, u = profiles[l].caps(k)
        top = min(u, d)
        if l == L - 1:
            return sum(math.comb(u, j) for j in range(top + 1))
        total = 0
        for j in range(top + 1):
            nxt = a - j
            total += math.comb(u, j) * R(l + 1, nxt, min(nxt, d))
        return total

    return R(0, n0, n0)


def empirical_upper_bound_enumerated(profiles: Sequence[LayerActivityProfile], n0: int) -> int:
    """Same value as :func:`empirical_upper_bound`, by summing over every index tuple.

    The active count passed on from layer ``l`` is ``active_cap - j_l``, and
    the dimension cap is the minimum of ``n0`` and all earlier active counts.
    Exponential; intended for small cross-checks.
    """
    total = 0

    def walk(l, k, d, prod):
        nonlocal total
        if l == len(profiles):
            total += prod
            return
        a, u = profiles[l].caps(k)
        for j in range(min(u, d) + 1):
            nxt = a - j
            walk(l + 1, nxt, min(d, nxt), prod * math.comb(u, j))

    walk(0, n0, n0, 1)
    return total


def configuration_upper_bound(widths: Sequence[int], n0: int) -> int:
    """Region bound depending only on the widths: every unit unstable and free to activate."""
    if not widths:
        raise ValueError("widths must be nonempty")
    return empirical_upper_bound(trivial_profiles(widths, n0), n0)


def montufar_bound(widths: Sequence[int], n0: int) -> int:
    if not widths:
        raise ValueError("widths must be nonempty")
    out = 1
    d = n0
    for n in widths:
        d = min(d, n)
        out *= _layer_sum(n, d)
    return out


def raghu_bound(widths: Sequence[int], n0: int) -> int:
    if not widths:
        raise ValueError("widths must be nonempty")
    out = 1
    prev = n0
    for n in widths:
        out *= _layer_sum(n, prev)
        prev = n
    return out


@dataclass
class UpperBoundReport:
    empirical_ub: int
    configuration_ub: int
    montufar_ub: int
    raghu_ub: int
    profiles: list[LayerActivityProfile] = field(default_factory=list)

    @property
    def eta(self) -> dict[str, float]:
        return {"empirical": maps(self.empirical_ub), "configuration": maps(self.configuration_ub),
                "montufar": maps(self.montufar_ub), "raghu": maps(self.raghu_ub)}

    @property
    def chain_holds(self) -> bool:
        return (self.empirical_ub <= self.configuration_ub <= self.montufar_ub
                <= self.raghu_ub)

    def to_dict(self) -> dict:
        # big integers as strings so JSON consumers do not lose precision
        return {
            "empirical_ub": str(self.empirical_ub),
            "configuration_ub": str(self.configuration_ub),
            "montufar_ub": str(self.montufar_ub),
            "raghu_ub": str(self.raghu_ub),
            "eta": self.eta,
            "profiles": [p.to_dict() for p in self.profiles],
        }


def upper_bounds(net: NetworkModel, ub: UnitBounds | None = None,
                 exact_k_cap: int = DEFAULT_EXACT_K_CAP) -> UpperBoundReport:
    """All four upper bounds; without ``ub`` the empirical bound falls back to the trivial profile."""
    widths, n0 = net.widths, net.input_dim
    profiles = (trivial_profiles(widths, n0) if ub is None
                else build_profiles(net, ub, exact_k_cap))
    return UpperBoundReport(empirical_upper_bound(profiles, n0),
                            configuration_upper_bound(widths, n0),
                            montufar_bound(widths, n0), raghu_bound(widths, n0), profiles)

