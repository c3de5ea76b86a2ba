"""Big-M MILP encoding of a ReLU network and the related LPs."""

from __future__ import annotations

import enum
import hashlib
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lp import LinearProgram, LpStatus, Row, solve_lp
from .milp import DEFAULT_NODE_LIMIT, MilpModel, SearchLimitError, solve_milp
from .model import ActivationPattern, NetworkModel, dumps_network

DEFAULT_EPS = 1e-6
METHODS = ("interval", "lp", "milp")


class Stability(str, enum.Enum):
    STABLY_ACTIVE = "stably_active"
    STABLY_INACTIVE = "stably_inactive"
    UNSTABLE = "unstable"


class Leaning(str, enum.Enum):
    ACTIVE_LEANING = "active_leaning"
    INACTIVE_LEANING = "inactive_leaning"
    NOT_APPLICABLE = "not_applicable"


class InconsistentBoundsError(ValueError):
    pass


def classify(H: float, Hbar: float) -> Stability:
    if H <= 0:
        return Stability.STABLY_INACTIVE
    if Hbar < 0:
        return Stability.STABLY_ACTIVE
    return Stability.UNSTABLE


def lean(stability: Stability, bias: float) -> Leaning:
    if stability is not Stability.UNSTABLE:
        return Leaning.NOT_APPLICABLE
    return Leaning.ACTIVE_LEANING if bias > 0 else Leaning.INACTIVE_LEANING


def network_fingerprint(net: NetworkModel) -> str:
    return hashlib.sha256(dumps_network(net).encode()).hexdigest()


@dataclass
class UnitBounds:
    """Big-M constants per unit: ``H`` bounds ``g`` from above, ``Hbar`` bounds ``-g``."""

    H: list[np.ndarray]
    Hbar: list[np.ndarray]
    stability: list[tuple[Stability, ...]]
    leaning: list[tuple[Leaning, ...]]
    method: str = "interval"
    fingerprint: str | None = None
    elapsed: float = 0.0
    notes: list[str] = field(default_factory=list)

    @classmethod
    def from_arrays(cls, net: NetworkModel, H, Hbar, method: str = "interval",
                    **kw) -> "UnitBounds":
        H = [np.asarray(h, dtype=float) for h in H]
        Hbar = [np.asarray(h, dtype=float) for h in Hbar]
        stab = [tuple(classify(a, b) for a, b in zip(h, hb)) for h, hb in zip(H, Hbar)]
        leans = [tuple(lean(s, bi) for s, bi in zip(st, layer.bias))
                 for st, layer in zip(stab, net.layers)]
        return cls(H, Hbar, stab, leans, method, network_fingerprint(net), **kw)

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(len(h) for h in self.H)

    def units(self, kind: Stability | None = None):
        for l, st in enumerate(self.stability):
            for i, s in enumerate(st):
                if kind is None or s is kind:
                    yield l, i

    @property
    def n_unstable(self) -> int:
        return sum(1 for _ in self.units(Stability.UNSTABLE))

    def summary(self) -> dict:
        return {
            "method": self.method,
            "per_layer": [
                {s.value: sum(1 for t in st if t is s) for s in Stability}
                for st in self.stability
            ],
            "n_unstable": self.n_unstable,
        }

    def check(self, net: NetworkModel) -> None:
        """Raise :class:`InconsistentBoundsError` if the invariants do not hold."""
        if self.widths != net.widths:
            raise InconsistentBoundsError("bounds do not match network widths")
        for l, layer in enumerate(net.layers):
            for i in range(layer.width):
                H, Hb = self.H[l][i], self.Hbar[l][i]
                if not (np.isfinite(H) and np.isfinite(Hb)):
                    raise InconsistentBoundsError(f"unit ({l + 1},{i + 1}): non-finite bound")
                if H < -Hb - 1e-9:
                    raise InconsistentBoundsError(f"unit ({l + 1},{i + 1}): H < -Hbar")
                s = classify(H, Hb)
                if self.stability[l][i] is not s:
                    raise InconsistentBoundsError(f"unit ({l + 1},{i + 1}): stability label")
                if self.leaning[l][i] is not lean(s, layer.bias[i]):
                    raise InconsistentBoundsError(f"unit ({l + 1},{i + 1}): leaning label")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "fingerprint": self.fingerprint,
            "elapsed": self.elapsed,
            "H": [h.tolist() for h in self.H],
            "Hbar": [h.tolist() for h in self.Hbar],
            "stability": [[s.value for s in st] for st in self.stability],
            "leaning": [[s.value for s in le] for le in self.leaning],
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UnitBounds":
        return cls(
            [np.asarray(h, dtype=float) for h in data["H"]],
            [np.asarray(h, dtype=float) for h in data["Hbar"]],
            [tuple(Stability(s) for s in st) for st in data["stability"]],
            [tuple(Leaning(s) for s in le) for le in data["leaning"]],
            data.get("method", "interval"),
            data.get("fingerprint"),
            data.get("elapsed", 0.0),
            list(data.get("notes", [])),
        )


# --------------------------------------------------------------------------
# encoding

@dataclass
class Encoding:
    """Variables of the big-M encoding; dictionaries are keyed by ``(layer, unit)``."""

    lp: LinearProgram
    x: list[int]
    g: dict
    h: dict
    hbar: dict
    z: dict
    binaries: list[int]

    def layer_outputs(self, l: int) -> dict:
        """Map unit index to the variable holding its output ``h`` (stably inactive units absent)."""
        return {i: v for (ll, i), v in self.h.items() if ll == l}


def encode_layers(net: NetworkModel, H, Hbar, stability, upto: int | None = None) -> Encoding:
    """Constraints linking inputs to layers ``0..upto-1`` (0-based) of ``net``.

    Stably inactive units are dropped (their output is 0); stably active
    units use ``h = g``; unstable units get ``h, hbar, z`` with big-M rows.
    """
    upto = net.depth if upto is None else upto
    lp = LinearProgram()
    dom = net.domain
    x = [lp.add_variable(dom.lower[k], dom.upper[k], name=f"x{k}") for k in range(net.input_dim)]
    g, h, hbar, z = {}, {}, {}, {}
    binaries = []
    prev = dict(enumerate(x))
    for l in range(upto):
        layer = net.layers[l]
        cur = {}
        for i in range(layer.width):
            st = stability[l][i]
            if st is Stability.STABLY_INACTIVE:
                continue
            Hi, Hbi = float(H[l][i]), float(Hbar[l][i])
            gv = lp.add_variable(-Hbi, Hi, name=f"g{l}_{i}")
            coeffs = {gv: 1.0}
            for j, v in prev.items():
                w = layer.weights[i, j]
                if w != 0:
                    coeffs[v] = coeffs.get(v, 0.0) - w
            lp.add_row(coeffs, "=", float(layer.bias[i]))
            g[l, i] = gv
            if st is Stability.STABLY_ACTIVE:
                h[l, i] = gv
            else:
                hv = lp.add_variable(0.0, max(Hi, 0.0), name=f"h{l}_{i}")
                hb = lp.add_variable(0.0, max(Hbi, 0.0), name=f"hbar{l}_{i}")
                zv = lp.add_variable(0.0, 1.0, name=f"z{l}_{i}")
                lp.add_row({gv: 1.0, hv: -1.0, hb: 1.0}, "=", 0.0)
                lp.add_row({hv: 1.0, zv: -Hi}, "<=", 0.0)
                lp.add_row({hb: 1.0, zv: Hbi}, "<=", Hbi)
                h[l, i], hbar[l, i], z[l, i] = hv, hb, zv
                binaries.append(zv)
            cur[i] = h[l, i]
        prev = cur
    return Encoding(lp, x, g, h, hbar, z, binaries)


# --------------------------------------------------------------------------
# bound tightening

def _interval_layer(layer, lo, hi):
    Wp = np.maximum(layer.weights, 0.0)
    Wn = np.minimum(layer.weights, 0.0)
    g_hi = Wp @ hi + Wn @ lo + layer.bias
    g_lo = Wp @ lo + Wn @ hi + layer.bias
    return g_hi, -g_lo


def _output_range(H, Hbar, stab):
    lo = np.zeros(len(H))
    hi = np.zeros(len(H))
    for i, s in enumerate(stab):
        if s is Stability.STABLY_ACTIVE:
            lo[i], hi[i] = -Hbar[i], H[i]
        elif s is Stability.UNSTABLE:
            hi[i] = H[i]
    return lo, hi


def tighten_bounds(net: NetworkModel, method: str = "milp", *,
                   node_limit: int = DEFAULT_NODE_LIMIT,
                   time_limit: float | None = None) -> UnitBounds:
    """Compute ``H``/``Hbar`` for every unit, layer by layer.

    ``interval`` propagates boxes; ``lp`` maximises ``g`` over the LP
    relaxation of the earlier layers; ``milp`` solves the exact MILPs. Stable
    units found in a layer are substituted before the next layer is
    processed. Every method returns valid bounds; ``lp`` and ``milp`` are
    additionally clipped by the interval bound built from their own
    earlier layers. If a MILP hits ``node_limit``/``time_limit``, the best
    proven bound is used instead.
    """
    if method not in METHODS:
        raise ValueError(f"unknown tightening method {method!r}")
    start = time.monotonic()
    deadline = None if time_limit is None else start + time_limit
    H_all, Hb_all, stab_all = [], [], []
    notes = []
    lo, hi = net.domain.lower.astype(float), net.domain.upper.astype(float)
    for l, layer in enumerate(net.layers):
        H, Hb = _interval_layer(layer, lo, hi)
        if method != "interval" and l > 0:
            enc = encode_layers(net, H_all, Hb_all, stab_all, upto=l)
            outs = enc.layer_outputs(l - 1)
            for i in range(layer.width):
                coeffs = {v: float(layer.weights[i, j]) for j, v in outs.items()
                          if layer.weights[i, j] != 0}
                remaining = None if deadline is None else max(deadline - time.monotonic(), 0.0)
                up, n1 = _optimize(enc, coeffs, True, method, node_limit, remaining)
                down, n2 = _optimize(enc, coeffs, False, method, node_limit, remaining)
                if up is not None:
                    H[i] = min(H[i], up + layer.bias[i])
                if down is not None:
                    Hb[i] = min(Hb[i], -(down + layer.bias[i]))
                for n in (n1, n2):
                    if n:
                        notes.append(f"layer {l + 1} unit {i + 1}: {n}")
        stab = tuple(classify(a, b) for a, b in zip(H, Hb))
        H_all.append(H)
        Hb_all.append(Hb)
        stab_all.append(stab)
        lo, hi = _output_range(H, Hb, stab)
    return UnitBounds.from_arrays(net, H_all, Hb_all, method,
                                  elapsed=time.monotonic() - start, notes=notes)


def _optimize(enc: Encoding, coeffs: dict, maximize: bool, method: str, node_limit, time_limit):
    """Optimal value of ``coeffs . vars`` (None if no bound was proven), plus a note."""
    if not coeffs:
        return 0.0, None
    lp = enc.lp.copy()
    lp.set_objective(coeffs, maximize)
    if method == "lp" or not enc.binaries:
        sol = solve_lp(lp)
        if sol.status is LpStatus.OPTIMAL:
            return sol.objective, None
        return None, f"LP status {sol.status.value}"
    try:
        res = solve_milp(MilpModel(lp, enc.binaries), node_limit=node_limit,
                         time_limit=time_limit)
    except SearchLimitError as exc:
        return exc.bound, f"search limit, using proven bound ({exc})"
    if res.x is None:
        return None, f"MILP status {res.status.value}"
    return res.objective, None


# --------------------------------------------------------------------------
# counting model

@dataclass
class CountingMilp:
    milp: MilpModel
    encoding: Encoding
    f: int
    bounds: UnitBounds
    unstable: list  # (layer, unit) in binary order

    @property
    def binaries(self) -> tuple[int, ...]:
        return self.milp.binaries

    def pattern_from_key(self, key: Sequence[int]) -> ActivationPattern:
        bits = [[1 if s is Stability.STABLY_ACTIVE else 0 for s in st]
                for st in self.bounds.stability]
        for (l, i), b in zip(self.unstable, key):
            bits[l][i] = int(b)
        return ActivationPattern(tuple(tuple(b) for b in bits))

    def pattern_from_solution(self, x) -> ActivationPattern:
        return self.pattern_from_key([int(round(x[v])) for v in self.binaries])


def build_counting_milp(net: NetworkModel, ub: UnitBounds, eps: float = DEFAULT_EPS,
                        with_valid_inequalities: bool = False,
                        full_dim: bool = False) -> CountingMilp:
    """MILP whose solutions with ``f >= eps`` project onto the activation patterns."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    ub.check(net)
    enc = encode_layers(net, ub.H, ub.Hbar, ub.stability)
    lp = enc.lp
    Hs = [float(ub.H[l][i]) for (l, i) in enc.g]
    f_cap = max([eps] + Hs)
    f = lp.add_variable(0.0, f_cap, cost=1.0, name="f")
    lp.maximize = True
    for (l, i), gv in enc.g.items():
        st = ub.stability[l][i]
        if st is Stability.STABLY_ACTIVE:
            lp.add_row({f: 1.0, gv: -1.0}, "<=", 0.0)
        else:
            M = max(float(ub.H[l][i]), eps)
            lp.add_row({f: 1.0, enc.h[l, i]: -1.0, enc.z[l, i]: M}, "<=", M)
            if full_dim:
                lp.add_row({enc.hbar[l, i]: 1.0, enc.z[l, i]: eps}, ">=", eps)
    if full_dim:
        _add_strict_inactive_rows(net, ub, enc, eps)
    if with_valid_inequalities:
        for row in valid_inequalities(net, ub, enc):
            lp.add_row(row)
    unstable = list(enc.z.keys())
    model = MilpModel(lp, enc.binaries, eps_obj=eps)
    return CountingMilp(model, enc, f, ub, unstable)


def _add_strict_inactive_rows(net, ub, enc, eps):
    lp = enc.lp
    for l, i in ub.units(Stability.STABLY_INACTIVE):
        if ub.H[l][i] <= -eps:
            continue
        layer = net.layers[l]
        prev = dict(enumerate(enc.x)) if l == 0 else enc.layer_outputs(l - 1)
        coeffs = {}
        for j, v in prev.items():
            if layer.weights[i, j] != 0:
                coeffs[v] = coeffs.get(v, 0.0) + float(layer.weights[i, j])
        lp.add_row(coeffs, "<=", -eps - float(layer.bias[i]))


def valid_inequalities(net: NetworkModel, ub: UnitBounds, enc: Encoding) -> list[Row]:
    """Rows linking an unstable unit's ``z`` to the ``z`` of upstream units.

    An inactive-leaning unit can only turn on if some upstream unit with a
    positive weight is on; an active-leaning unit can only turn off if some
    upstream unit with a negative weight is on. Stable upstream units enter
    as constants.
    """
    rows = []
    for (l, i) in enc.z:
        if l == 0:
            continue
        W = net.layers[l].weights[i]
        leaning = ub.leaning[l][i]
        if leaning is Leaning.INACTIVE_LEANING:
            support = [j for j in range(len(W)) if W[j] > 0]
        else:
            support = [j for j in range(len(W)) if W[j] < 0]
        const = sum(1 for j in support if ub.stability[l - 1][j] is Stability.STABLY_ACTIVE)
        if const >= 1:
            continue
        zs = [enc.z[l - 1, j] for j in support if (l - 1, j) in enc.z]
        coeffs = {v: -1.0 for v in zs}
        if leaning is Leaning.INACTIVE_LEANING:
            # z_i <= sum z_j
            coeffs[enc.z[l, i]] = 1.0
            rows.append(Row.from_mapping(coeffs, "<=", 0.0))
        else:
            # 1 - z_i <= sum z_j
            coeffs[enc.z[l, i]] = -1.0
            rows.append(Row.from_mapping(coeffs, "<=", -1.0))
    return rows


# --------------------------------------------------------------------------
# per-pattern LP

def affine_maps(net: NetworkModel, pattern: ActivationPattern, n_layers: int | None = None):
    """Pre-activation affine maps ``g^l = A x + c`` implied by fixing the pattern."""
    n_layers = net.depth if n_layers is None else n_layers
    A_h = np.eye(net.input_dim)
    c_h = np.zeros(net.input_dim)
    out = []
    for l in range(n_layers):
        layer = net.layers[l]
        A_g = layer.weights @ A_h
        c_g = layer.weights @ c_h + layer.bias
        out.append((A_g, c_g))
        mask = np.array(pattern.layers[l], dtype=float)[:, None] if l < len(pattern.layers) \
            else None
        if mask is None:
            break
        A_h = A_g * mask
        c_h = c_g * mask[:, 0]
    return out


def region_lp(net: NetworkModel, pattern: ActivationPattern, eps: float = DEFAULT_EPS,
              full_dim: bool = False, bounds: UnitBounds | None = None) -> LinearProgram:
    """LP over the inputs that is feasible iff some ``x`` realises ``pattern``.

    Active units need ``g >= eps``; inactive units need ``g <= 0`` (``<= -eps``
    with ``full_dim``). With ``bounds``, rows for stably inactive units that
    the pattern marks inactive are omitted as redundant.
    """
    if pattern.widths != net.widths:
        raise ValueError(f"pattern widths {pattern.widths} do not match network {net.widths}")
    lp = LinearProgram()
    for k in range(net.input_dim):
        lp.add_variable(net.domain.lower[k], net.domain.upper[k])
    for l, (A, c) in enumerate(affine_maps(net, pattern)):
        for i, bit in enumerate(pattern.layers[l]):
            if (bounds is not None and not bit and not full_dim
                    and bounds.stability[l][i] is Stability.STABLY_INACTIVE):
                continue
            if bit:
                lp.add_row(list(A[i]), ">=", eps - c[i])
            else:
                lp.add_row(list(A[i]), "<=", (-eps if full_dim else 0.0) - c[i])
    return lp


# --------------------------------------------------------------------------
# convex hull of the ReLU graph

@dataclass(frozen=True)
class HalfPlane:
    """``cg * g + ch * h <= rhs``."""

    cg: float
    ch: float
    rhs: float

    def contains(self, g, h, tol: float = 0.0):
        return self.cg * np.asarray(g) + self.ch * np.asarray(h) <= self.rhs + tol


def convex_outer_polygon(H: float, Hbar: float) -> tuple[HalfPlane, ...]:
    """Inequalities ``h >= 0``, ``h >= g`` and ``(H + Hbar) h <= H (g + Hbar)``.

    For ``H, Hbar >= 0`` their intersection is the triangle with vertices
    ``(-Hbar, 0)``, ``(0, 0)`` and ``(H, H)``: the projection of the big-M
    relaxation of one unit onto ``(g, h)``. When both are zero the third row
    is vacuous, so ``h <= 0`` and ``g >= 0`` pin the triangle to the origin.
    """
    if H < 0 or Hbar < 0:
        raise ValueError("H and Hbar must be non-negative")
    rows = (HalfPlane(0.0, -1.0, 0.0), HalfPlane(1.0, -1.0, 0.0))
    if H == 0 and Hbar == 0:
        return rows + (HalfPlane(0.0, 1.0, 0.0), HalfPlane(-1.0, 0.0, 0.0))
    return rows + (HalfPlane(-float(H), float(H) + float(Hbar), float(H) * float(Hbar)),)


def in_polygon(polygon, g, h, tol: float = 0.0):
    out = np.ones(np.broadcast(np.asarray(g), np.asarray(h)).shape, dtype=bool)
    for hp in polygon:
        out &= hp.contains(g, h, tol)
    return out
