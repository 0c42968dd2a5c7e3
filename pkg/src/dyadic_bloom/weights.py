"""Muckenhoupt weights on the grid: generators, A_p characteristics, Bloom weights."""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .core import DyadicGrid, GridFunction, block_means, slice_average

EAGER_CACHE_DEPTH = 6


def dual_exponent(p):
    if not 1 < p < np.inf:
        raise ValueError(f"exponent must lie in (1, inf), got {p}")
    return p / (p - 1)


class Weight:
    """Strictly positive grid function with cached rectangle averages.

    ``averages(s)`` returns the block means of w**s over all dyadic
    rectangles (see ``block_means``).  The plain averages are computed at
    construction for depths up to 6, others on first request.
    """

    def __init__(self, grid, values, meta=None):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError("weight values do not match the grid")
        if not np.all(np.isfinite(values)) or values.min() <= 0:
            raise ValueError("weights must be finite and strictly positive")
        values = values.copy()
        values.flags.writeable = False
        self.grid = grid
        self.values = values
        self.meta = dict(meta or {"kind": "explicit"})
        self._cache = {}
        self._lock = threading.Lock()
        if max(grid.depths) <= EAGER_CACHE_DEPTH:
            self.averages(1.0)

    @classmethod
    def from_function(cls, f, meta=None):
        return cls(f.grid, f.values, meta)

    def function(self):
        return GridFunction(self.grid, self.values)

    def averages(self, s=1.0):
        s = float(s)
        with self._lock:
            if s not in self._cache:
                self._cache[s] = block_means(self.grid, self.values ** s)
            return self._cache[s]

    def measure(self, mask):
        """w(E) for a boolean cell mask."""
        return float(self.values[mask].sum() / self.grid.size)

    def scaled(self, c):
        meta = dict(self.meta)
        meta["scale"] = meta.get("scale", 1.0) * c
        return Weight(self.grid, self.values * c, meta)

    def to_dict(self):
        d = self.grid.to_dict()
        d["meta"] = self.meta
        d["values"] = self.function().spatial().reshape(-1).tolist()
        return d

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        grid = DyadicGrid((d["K1"], d["K2"]), (d["n1"], d["n2"]))
        f = GridFunction.from_spatial(grid, np.asarray(d["values"]))
        return cls(grid, f.values, d.get("meta"))


def unit_weight(grid):
    return Weight(grid, np.ones(grid.shape), {"kind": "constant", "value": 1.0})


def as_weight(w, grid):
    if w is None:
        return unit_weight(grid)
    if isinstance(w, Weight):
        if w.grid != grid:
            raise ValueError("weight grid mismatch")
        return w
    return Weight(grid, w)


# ---------------------------------------------------------------------------
# generators

def cascade_weight(grid, delta=0.5, seed=0, decay=1.0):
    """Multiplicative cascade on the biparameter tree.

    At step s = 1, 2, ... every rectangle of levels (min(s,K1), min(s,K2))
    multiplies the value inherited from its parent by exp(a_s U) with U
    uniform on [-1, 1] and a_s = log(1 + delta) decay^{s-1}.  Each factor
    therefore lies in [1/(1+delta), 1+delta].  The factors of step s are
    drawn from a stream seeded by (seed, s), so the coarse structure does
    not depend on the depth of the grid.
    """
    if delta <= 0:
        raise ValueError("cascade ratio bound must be positive")
    a1, a2 = grid.axes
    logw = np.zeros(grid.shape)
    for s in range(1, max(a1.K, a2.K) + 1):
        k1, k2 = min(s, a1.K), min(s, a2.K)
        rng = np.random.default_rng([seed, s])
        amp = np.log1p(delta) * decay ** (s - 1)
        u = rng.uniform(-1.0, 1.0, size=(a1.cubes_at(k1), a2.cubes_at(k2)))
        logw += np.repeat(np.repeat(amp * u, a1.N // a1.cubes_at(k1), 0),
                          a2.N // a2.cubes_at(k2), 1)
    meta = {"kind": "cascade", "delta": delta, "decay": decay, "seed": seed}
    return Weight(grid, np.exp(logw), meta)


def _power_cell_average(m, alpha):
    """Exact averages of |x - 1/2|^alpha over the m cells of [0, 1)."""
    edges = np.arange(m + 1) / m - 0.5
    F = np.sign(edges) * np.abs(edges) ** (alpha + 1) / (alpha + 1)
    return np.diff(F) * m


def power_weight(grid, alphas=(0.5, 0.5)):
    """Tensor power weight prod |x_i - 1/2|^{alpha_t}, exact cell averages.

    alphas holds one exponent per parameter, applied to each coordinate.
    """
    a1, a2 = grid.axes
    factors = []
    for ax, alpha in zip((a1, a2), alphas):
        if alpha <= -1:
            raise ValueError("power exponents must exceed -1")
        side = _power_cell_average(2 ** ax.K, alpha)
        factors.append(np.prod(side[ax.cell_positions], axis=1))
    meta = {"kind": "power", "alphas": list(map(float, alphas))}
    return Weight(grid, np.outer(*factors), meta)


def constant_weight(grid, value=1.0):
    return Weight(grid, np.full(grid.shape, float(value)), {"kind": "constant", "value": value})


@dataclass(frozen=True)
class WeightFamilyConfig:
    kind: str = "cascade"
    delta: float = 0.5
    decay: float = 1.0
    alphas: tuple = (0.5, 0.5)
    value: float = 1.0
    seed: int = 0

    def build(self, grid, seed=None):
        seed = self.seed if seed is None else seed
        if self.kind == "cascade":
            return cascade_weight(grid, self.delta, seed, self.decay)
        if self.kind == "power":
            return power_weight(grid, self.alphas)
        if self.kind == "constant":
            return constant_weight(grid, self.value)
        raise ValueError(f"unknown weight generator {self.kind!r}")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "alphas" in d:
            d["alphas"] = tuple(d["alphas"])
        return cls(**d)


# ---------------------------------------------------------------------------
# characteristics

def ap_characteristic(w, p, scope="biparameter"):
    """Dyadic A_p characteristic sup <w><w^{1-p'}>^{p-1}.

    scope: "biparameter" (all dyadic rectangles), "parameter1" / "parameter2"
    (cubes of that parameter, uniformly over the other variable) or
    "one-parameter" (the larger of the two slice characteristics).
    """
    pd = dual_exponent(p)
    A = w.averages(1.0)
    B = w.averages(1.0 - pd)
    K1, K2 = w.grid.depths
    if scope == "biparameter":
        pairs = [(k1, k2) for k1 in range(K1 + 1) for k2 in range(K2 + 1)]
    elif scope == "parameter1":
        pairs = [(k1, K2) for k1 in range(K1 + 1)]
    elif scope == "parameter2":
        pairs = [(K1, k2) for k2 in range(K2 + 1)]
    elif scope == "one-parameter":
        return max(ap_characteristic(w, p, "parameter1"), ap_characteristic(w, p, "parameter2"))
    else:
        raise ValueError(f"unknown scope {scope!r}")
    return float(max(np.max(A[k1][k2] * B[k1][k2] ** (p - 1)) for k1, k2 in pairs))


@dataclass(frozen=True)
class OneParameterWeight:
    """Positive weight on the cells of one parameter (Morton order)."""

    axis: object
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if np.min(self.values) <= 0:
            raise ValueError("weights must be strictly positive")

    def characteristic(self, p):
        pd = dual_exponent(p)
        ax = self.axis
        best = 1.0
        for k in range(ax.K + 1):
            c = ax.cubes_at(k)
            a = self.values.reshape(c, -1).mean(axis=1)
            b = (self.values ** (1 - pd)).reshape(c, -1).mean(axis=1)
            best = max(best, float(np.max(a * b ** (p - 1))))
        return best


def averaged_weight(w, Q):
    """m_Q w as a weight on the other parameter."""
    other = w.grid.axis(3 - Q.parameter)
    return OneParameterWeight(other, slice_average(w.function(), Q))


def conjugate_weight(w, p):
    pd = dual_exponent(p)
    meta = {"kind": "conjugate", "p": p, "of": w.meta}
    return Weight(w.grid, w.values ** (1 - pd), meta)


@dataclass(frozen=True)
class BloomTriple:
    mu: Weight
    lam: Weight
    p: float

    def __post_init__(self):
        dual_exponent(self.p)
        if self.mu.grid != self.lam.grid:
            raise ValueError("mu and lambda live on different grids")

    @property
    def grid(self):
        return self.mu.grid

    @cached_property
    def nu(self):
        return bloom_weight(self)


def bloom_weight(t):
    """nu = mu^{1/p} lambda^{-1/p}."""
    v = t.mu.values ** (1 / t.p) * t.lam.values ** (-1 / t.p)
    return Weight(t.mu.grid, v, {"kind": "bloom", "p": t.p})


def reverse_holder_probe(w, eps_grid, samples=200, seed=0):
    """Reverse Holder constants of w over dyadic rectangles.

    For each eps returns C = max_R <w^{1+eps}>_R^{1/(1+eps)} / <w>_R and,
    with delta = eps/(1+eps), the largest sampled value of
    (w(E)/w(R)) / (|E|/|R|)^delta over random cell subsets E of random
    rectangles R.  Holder's inequality bounds the second by the first.
    """
    eps_grid = list(eps_grid)
    if not eps_grid:
        raise ValueError("empty eps grid")
    grid = w.grid
    a1, a2 = grid.axes
    A = w.averages(1.0)
    rng = np.random.default_rng(seed)
    picks = []
    for _ in range(samples):
        k1 = int(rng.integers(0, a1.K + 1))
        k2 = int(rng.integers(0, a2.K + 1))
        c1 = int(rng.integers(0, a1.cubes_at(k1)))
        c2 = int(rng.integers(0, a2.cubes_at(k2)))
        block = w.values[a1.cube_cells(k1, c1), a2.cube_cells(k2, c2)].ravel()
        mask = rng.random(block.size) < rng.uniform(0.05, 1.0)
        if not mask.any():
            mask[int(rng.integers(0, block.size))] = True
        picks.append((block[mask].sum() / block.sum(), mask.mean()))
    ratios = np.array(picks)
    rows = []
    for eps in eps_grid:
        if eps <= 0:
            raise ValueError("eps must be positive")
        Be = w.averages(1.0 + eps)
        C = max(float(np.max(Be[k1][k2] ** (1 / (1 + eps)) / A[k1][k2]))
                for k1 in range(a1.K + 1) for k2 in range(a2.K + 1))
        delta = eps / (1 + eps)
        C_sets = float(np.max(ratios[:, 0] / ratios[:, 1] ** delta))
        rows.append({"eps": float(eps), "C": C, "delta": delta, "C_sets": C_sets})
    return rows


# ---------------------------------------------------------------------------
# norms

def weighted_lp_norm(f, w=None, p=2.0):
    """(sum |f|^p w |cell|)^{1/p}; w = None means Lebesgue measure."""
    if p < 1:
        raise ValueError("p must be at least 1")
    v = f.values if isinstance(f, GridFunction) else np.asarray(f)
    wv = 1.0 if w is None else w.values
    return float(np.mean(np.abs(v) ** p * wv) ** (1 / p))


def duality_gap(f, w, p, trials=32, seed=0):
    """||f||_{L^p(w)} minus the best pairing |<f, g>| over sampled g.

    The g are normalized in L^{p'}(w') and include the extremizer
    sign(f)|f|^{p-1} w / ||f||^{p-1}, so the gap is zero up to round-off.
    """
    pd = dual_exponent(p)
    wc = conjugate_weight(w, p)
    norm = weighted_lp_norm(f, w, p)
    if norm == 0:
        return 0.0
    v = f.values
    gs = [np.sign(v) * np.abs(v) ** (p - 1) * w.values / norm ** (p - 1)]
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        g = rng.standard_normal(v.shape)
        gs.append(g / weighted_lp_norm(g, wc, pd))
    best = max(abs(float(np.mean(v * g))) for g in gs)
    return norm - best
