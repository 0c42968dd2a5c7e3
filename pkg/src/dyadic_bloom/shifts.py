"""Biparameter dyadic shifts: cancellative, full standard, full mixed and partial."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .bmo import bmo_one_parameter_norm, bmo_product_norm
from .core import GridFunction, is_fully_cancellative
from .linops import GridOperator, add, scale, zero_operator
from .maxsquare import ShiftComplexity
from .paraproducts import Symbol, apply_modes, paraproduct_operator

SHIFT_KINDS = ("cancellative", "full-standard", "full-mixed", "partial")


# ---------------------------------------------------------------------------
# one-parameter entry tables

@dataclass(frozen=True)
class ShiftEntries:
    """All (R, P, e, Q, d) with P in (R)_i, Q in (R)_j for one parameter.

    Entries are ordered by the level of R, then R, P, e, Q, d.  `level_start`
    gives the first entry of each root level, so blocks of coefficients for a
    fixed root level pair do not depend on the depth of the grid.
    """

    i: int
    j: int
    p: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)
    root: np.ndarray = field(repr=False)
    root_level: np.ndarray = field(repr=False)
    level_start: tuple = ()

    @property
    def size(self):
        return self.p.size


_ENTRIES = {}


def shift_entries(axis, i, j):
    key = (axis.n, axis.K, i, j)
    if key in _ENTRIES:
        return _ENTRIES[key]
    lmax = axis.K - 1 - max(i, j)
    if lmax < 0:
        raise ValueError(f"complexity ({i}, {j}) not admissible at depth {axis.K}")
    n, ns = axis.n, axis.nsig
    ps, qs, roots, levels, starts = [], [], [], [], []
    count = 0
    for l in range(lmax + 1):
        starts.append(count)
        c = np.arange(axis.cubes_at(l))
        dp = np.arange(2 ** (i * n))
        dq = np.arange(2 ** (j * n))
        e = np.arange(ns)
        C, DP, E, DQ, D = np.meshgrid(c, dp, e, dq, e, indexing="ij")
        pc = (C << (i * n)) | DP
        qc = (C << (j * n)) | DQ
        p = 2 ** ((l + i) * n) + pc * ns + E
        q = 2 ** ((l + j) * n) + qc * ns + D
        ps.append(p.ravel())
        qs.append(q.ravel())
        roots.append(C.ravel())
        levels.append(np.full(p.size, l))
        count += p.size
    starts.append(count)
    ent = ShiftEntries(i, j, np.concatenate(ps), np.concatenate(qs), np.concatenate(roots),
                       np.concatenate(levels), tuple(starts))
    _ENTRIES[key] = ent
    return ent


def _incidence(N, idx):
    """Sparse (N, L) scatter matrix sending entry e to index idx[e]."""
    return sp.csr_matrix((np.ones(idx.size), (idx, np.arange(idx.size))), shape=(N, idx.size))


def _scatter_rows(M, X):
    """M @ X over the second-to-last axis of X for a sparse M."""
    lead, (L, m) = X.shape[:-2], X.shape[-2:]
    Y = np.asarray(M @ np.moveaxis(X, -2, 0).reshape(L, -1))
    return np.moveaxis(Y.reshape((M.shape[0],) + lead + (m,)), 0, -2)


def _scatter2(M1, M2, X):
    """M1 X M2^T for sparse M1, M2 and X with leading batch axes."""
    Y = _scatter_rows(M1, X)
    lead, (n, L) = Y.shape[:-2], Y.shape[-2:]
    Z = np.asarray(M2 @ Y.reshape(-1, L).T).T
    return Z.reshape(lead + (n, M2.shape[0]))


def coefficient_bound(grid, c):
    (n1, n2) = grid.axis_dims
    return 2.0 ** (-(n1 / 2) * (c.i[0] + c.j[0]) - (n2 / 2) * (c.i[1] + c.j[1]))


# ---------------------------------------------------------------------------
# cancellative shifts

class CancellativeShift:
    """S f = sum a(e1, e2) f^(P1^{e1} x P2^{e2}) h_{Q1}^{d1} (x) h_{Q2}^{d2}.

    coeffs has shape (L1, L2) indexed by the entry tables of the two
    parameters; every entry must satisfy |a| <= 2^{-(n1/2)(i1+j1) - (n2/2)(i2+j2)}.
    """

    def __init__(self, grid, complexity, coeffs):
        complexity.check(grid)
        self.grid = grid
        self.complexity = complexity
        self.entries = (shift_entries(grid.axes[0], *complexity.parameter(1)),
                        shift_entries(grid.axes[1], *complexity.parameter(2)))
        coeffs = np.asarray(coeffs, dtype=float)
        shape = (self.entries[0].size, self.entries[1].size)
        if coeffs.shape != shape:
            raise ValueError(f"coefficients of shape {coeffs.shape}, expected {shape}")
        self.bound = coefficient_bound(grid, complexity)
        if np.abs(coeffs).max(initial=0.0) > self.bound * (1 + 1e-12):
            raise ValueError("shift coefficient exceeds the admissible bound")
        coeffs = coeffs.copy()
        coeffs.flags.writeable = False
        self.coeffs = coeffs
        a1, a2 = grid.axes
        e1, e2 = self.entries
        self._P = (_incidence(a1.N, e1.p), _incidence(a2.N, e2.p))
        self._Q = (_incidence(a1.N, e1.q), _incidence(a2.N, e2.q))

    def _move(self, F, src, dst):
        a1, a2 = self.grid.axes
        C = a1.analysis @ F @ a2.analysis.T
        X = C[..., src[0], :][..., src[1]] * self.coeffs
        return a1.synthesis.T @ _scatter2(dst[0], dst[1], X) @ a2.synthesis

    def matvec(self, F):
        e1, e2 = self.entries
        return self._move(F, (e1.p, e2.p), self._Q)

    def rmatvec(self, G):
        e1, e2 = self.entries
        return self._move(G, (e1.q, e2.q), self._P)

    def operator(self):
        return GridOperator(self.grid, self.matvec, self.rmatvec, "S")

    def stats(self):
        a = self.coeffs
        return {"min": float(a.min(initial=0.0)), "max": float(a.max(initial=0.0)),
                "sup": float(np.abs(a).max(initial=0.0)), "bound": self.bound}


def apply_cancellative_shift(s, f):
    return GridFunction(s.grid, s.matvec(f.values))


def _level_blocks(ents1, ents2, seed, draw):
    """Fill an (L1, L2) array block by root-level pair with per-block streams."""
    out = np.zeros((ents1.size, ents2.size))
    for l1 in range(len(ents1.level_start) - 1):
        s1 = slice(ents1.level_start[l1], ents1.level_start[l1 + 1])
        for l2 in range(len(ents2.level_start) - 1):
            s2 = slice(ents2.level_start[l2], ents2.level_start[l2 + 1])
            rng = np.random.default_rng([seed, l1, l2])
            out[s1, s2] = draw(rng, (s1.stop - s1.start, s2.stop - s2.start))
    return out


def random_cancellative_shift(grid, complexity, seed=0, mode="uniform"):
    """Coefficients uniform in [-bound, bound], or +-bound ("adversarial")."""
    complexity.check(grid)
    e1 = shift_entries(grid.axes[0], *complexity.parameter(1))
    e2 = shift_entries(grid.axes[1], *complexity.parameter(2))
    bound = coefficient_bound(grid, complexity)
    if mode == "uniform":
        draw = lambda rng, shape: rng.uniform(-bound, bound, size=shape)
    elif mode == "adversarial":
        draw = lambda rng, shape: bound * rng.choice([-1.0, 1.0], size=shape)
    else:
        raise ValueError(f"unknown coefficient mode {mode!r}")
    return CancellativeShift(grid, complexity, _level_blocks(e1, e2, seed, draw))


def identity_shift(grid):
    """i = j = 0 with a = 1 on P = Q, e = d: the identity on the cancellative part."""
    c = ShiftComplexity()
    e1 = shift_entries(grid.axes[0], 0, 0)
    e2 = shift_entries(grid.axes[1], 0, 0)
    a = np.outer(e1.p == e1.q, e2.p == e2.q).astype(float)
    return CancellativeShift(grid, c, a)


# ---------------------------------------------------------------------------
# full standard and full mixed paraproducts

class ProductBmoSymbol:
    """Fully cancellative a, optionally divided by safety x its product BMO estimate."""

    def __init__(self, a, normalize=True, safety=2.0, budget=16):
        if not is_fully_cancellative(a, 1e-10):
            raise ValueError("product BMO symbols must be fully cancellative")
        self.estimate = bmo_product_norm(a, None, budget)[0] if normalize else None
        self.normalized = bool(normalize and self.estimate > 0)
        self.function = a / (safety * self.estimate) if self.normalized else a
        self.symbol = Symbol(self.function)
        self.grid = a.grid

    def stats(self):
        v = self.function.values
        return {"estimate": self.estimate, "normalized": self.normalized,
                "sup": float(np.abs(v).max())}


def _as_product_symbol(a):
    if isinstance(a, ProductBmoSymbol):
        return a.symbol
    return a if isinstance(a, Symbol) else Symbol(a)


def apply_full_standard(a, f, transpose=False):
    """Pi_a f = sum a^(R) <f>_R h_R, or its adjoint."""
    sym = _as_product_symbol(a)
    modes = ("B", "B") if transpose else ("A", "A")
    return GridFunction(f.grid, apply_modes(f.grid, modes, sym.coeffs, f.values))


def apply_full_mixed(a, orientation, f, transpose=False):
    """Pi_{a;(0,1)} f = sum a^(P) <f, h_{P1} (x) 1_{P2}/|P2|> 1_{P1}/|P1| (x) h_{P2}; (1,0) symmetric."""
    sym = _as_product_symbol(a)
    kind = _mixed_kind(orientation, transpose)
    return paraproduct_operator(kind, sym)(f)


def _mixed_kind(orientation, transpose=False):
    orientation = tuple(orientation)
    if orientation not in ((0, 1), (1, 0)):
        raise ValueError("orientation must be (0, 1) or (1, 0)")
    kind = "Pi01" if orientation == (0, 1) else "Pi10"
    if transpose:
        kind = "Pi10" if kind == "Pi01" else "Pi01"
    return kind


def random_product_symbol(grid, seed=0, normalize=True):
    """Fully cancellative a with a^(R) ~ N(0, |R|), drawn per level pair."""
    a1, a2 = grid.axes
    C = np.zeros(grid.shape)
    for l1 in range(a1.K):
        for l2 in range(a2.K):
            rng = np.random.default_rng([seed, l1, l2])
            s1 = slice(2 ** (l1 * a1.n), 2 ** ((l1 + 1) * a1.n))
            s2 = slice(2 ** (l2 * a2.n), 2 ** ((l2 + 1) * a2.n))
            scale_ = np.sqrt(a1.cube_measure(l1) * a2.cube_measure(l2))
            C[s1, s2] = scale_ * rng.standard_normal((s1.stop - s1.start, s2.stop - s2.start))
    a = GridFunction(grid, a1.synthesis.T @ C @ a2.synthesis)
    return ProductBmoSymbol(a, normalize=normalize)


# ---------------------------------------------------------------------------
# partial paraproducts

class PartialSymbolSequence:
    """One-parameter symbols a_{P1 Q1 R1} for a partial paraproduct.

    orientation 1: the sequence is indexed by the entries (R1, P1, e1, Q1, d1)
    of parameter 1 and each symbol is a mean-zero function of parameter 2;
    orientation 2 swaps the roles.  symbols has shape (L, N_other).
    """

    def __init__(self, grid, complexity, symbols, orientation=1):
        if orientation not in (1, 2):
            raise ValueError("orientation must be 1 or 2")
        self.grid = grid
        self.orientation = orientation
        self.complexity = tuple(int(v) for v in complexity)
        base = grid if orientation == 1 else grid.transpose()
        self.base = base
        self.entries = shift_entries(base.axes[0], *self.complexity)
        other = base.axes[1]
        symbols = np.asarray(symbols, dtype=float)
        if symbols.shape != (self.entries.size, other.N):
            raise ValueError(f"symbols of shape {symbols.shape}, expected "
                             f"{(self.entries.size, other.N)}")
        if symbols.size and np.abs(symbols.mean(axis=1)).max() > 1e-10 * max(1.0, np.abs(symbols).max()):
            raise ValueError("partial paraproduct symbols must have mean zero")
        n1 = base.axis_dims[0]
        self.bound = 2.0 ** (-(n1 / 2) * sum(self.complexity))
        norms = bmo_one_parameter_norm(other, symbols) if symbols.size else np.zeros(0)
        if np.max(norms, initial=0.0) > self.bound * (1 + 1e-9):
            raise ValueError("partial paraproduct symbol exceeds its BMO bound")
        self.norms = norms
        symbols = symbols.copy()
        symbols.flags.writeable = False
        self.symbols = symbols
        self.coeffs = other.forward(symbols)
        self._P = _incidence(base.axes[0].N, self.entries.p)
        self._Q = _incidence(base.axes[0].N, self.entries.q)

    def stats(self):
        return {"max_bmo": float(np.max(self.norms, initial=0.0)), "bound": self.bound,
                "count": int(self.entries.size)}


def _swap(F):
    return np.swapaxes(F, -1, -2)


def _partial_apply(sym, F):
    a1, a2 = sym.base.axes
    Fh = a1.analysis @ F @ a2.analysis.T
    X = sym.coeffs * Fh[..., sym.entries.p, :]
    O = _scatter_rows(sym._Q, X)
    O[..., :, 0] = 0.0
    return a1.synthesis.T @ O @ a2.cube_indicator


def _partial_adjoint(sym, G):
    a1, a2 = sym.base.axes
    Gha = a1.analysis @ G @ a2.cube_average.T
    X = sym.coeffs * Gha[..., sym.entries.q, :]
    O = _scatter_rows(sym._P, X)
    O[..., :, 0] = 0.0
    return a1.synthesis.T @ O @ a2.synthesis


def partial_operator(sym):
    if sym.orientation == 1:
        fwd = lambda F: _partial_apply(sym, F)
        adj = lambda G: _partial_adjoint(sym, G)
    else:
        fwd = lambda F: _swap(_partial_apply(sym, _swap(F)))
        adj = lambda G: _swap(_partial_adjoint(sym, _swap(G)))
    return GridOperator(sym.grid, fwd, adj, "Spartial")


def apply_partial(sym, f):
    """sum_{R1} sum_{P1, Q1} sum_{R2} a_{P1Q1R1}^(R2) f^(P1 x R2) h_{Q1} (x) 1_{R2}/|R2|.

    Signatures: e1 on P1, d1 on Q1, and the same signature on R2 for
    the symbol and f.
    """
    return partial_operator(sym)(f)


def random_partial_symbol(grid, complexity, seed=0, orientation=1, mode="uniform"):
    """Symbols with Haar coefficients ~ N(0, |R2|), rescaled to BMO norm u * bound.

    u is uniform in (0, 1], or 1 in "adversarial" mode.
    """
    base = grid if orientation == 1 else grid.transpose()
    ents = shift_entries(base.axes[0], *complexity)
    other = base.axes[1]
    C = np.zeros((ents.size, other.N))
    for l1 in range(len(ents.level_start) - 1):
        s = slice(ents.level_start[l1], ents.level_start[l1 + 1])
        for k2 in range(other.K):
            rng = np.random.default_rng([seed, l1, k2])
            cols = slice(2 ** (k2 * other.n), 2 ** ((k2 + 1) * other.n))
            C[s, cols] = np.sqrt(other.cube_measure(k2)) * rng.standard_normal(
                (s.stop - s.start, cols.stop - cols.start))
    symbols = other.inverse(C)
    norms = bmo_one_parameter_norm(other, symbols)
    rng = np.random.default_rng([seed, 99])
    u = np.ones(ents.size) if mode == "adversarial" else rng.uniform(1e-3, 1.0, ents.size)
    bound = 2.0 ** (-(base.axis_dims[0] / 2) * sum(complexity))
    symbols = symbols * (u * bound / np.where(norms > 0, norms, 1.0))[:, None]
    return PartialSymbolSequence(grid, complexity, symbols, orientation)


# ---------------------------------------------------------------------------
# descriptors and ensembles

@dataclass
class ShiftDescriptor:
    kind: str
    complexity: ShiftComplexity
    seed: int
    payload: object = field(repr=False)
    orientation: object = None

    def operator(self):
        if self.kind == "cancellative":
            return self.payload.operator()
        if self.kind == "full-standard":
            return paraproduct_operator("Pi", self.payload.symbol)
        if self.kind == "full-mixed":
            return paraproduct_operator(_mixed_kind(self.orientation), self.payload.symbol)
        if self.kind == "partial":
            return partial_operator(self.payload)
        raise ValueError(f"unknown shift kind {self.kind!r}")

    def to_dict(self):
        d = {"kind": self.kind, "seed": self.seed, "orientation": self.orientation,
             "stats": self.payload.stats()}
        d.update(self.complexity.to_dict())
        return d


def make_shift(grid, kind, complexity, seed=0, mode="uniform", orientation=None):
    """Random shift of the requested kind; non-cancellative kinds need zero complexity
    in at least one parameter (both parameters for full standard and full mixed)."""
    c = complexity
    if kind == "cancellative":
        return ShiftDescriptor(kind, c, seed, random_cancellative_shift(grid, c, seed, mode))
    if kind in ("full-standard", "full-mixed"):
        if c.total:
            raise ValueError(f"{kind} shifts have zero complexity")
        payload = random_product_symbol(grid, seed)
        if kind == "full-mixed":
            orientation = tuple(orientation or (0, 1))
        return ShiftDescriptor(kind, c, seed, payload, orientation)
    if kind == "partial":
        z1, z2 = c.parameter(1) == (0, 0), c.parameter(2) == (0, 0)
        if orientation is None:
            orientation = 1 if z2 else 2
        if (orientation == 1 and not z2) or (orientation == 2 and not z1):
            raise ValueError("partial paraproducts carry complexity in one parameter only")
        cc = c.parameter(orientation)
        payload = random_partial_symbol(grid, cc, seed, orientation, mode)
        return ShiftDescriptor(kind, c, seed, payload, orientation)
    raise ValueError(f"unknown shift kind {kind!r}")


@dataclass(frozen=True)
class EnsembleConfig:
    grid: object
    cap: tuple = (1, 1)
    delta: float = 0.5
    mode: str = "uniform"
    kinds: tuple = SHIFT_KINDS


def allowed_kinds(c, kinds=SHIFT_KINDS):
    z1, z2 = c.parameter(1) == (0, 0), c.parameter(2) == (0, 0)
    out = ["cancellative"]
    if z1 and z2:
        out += ["full-standard", "full-mixed"]
    if z1 or z2:
        out.append("partial")
    return [k for k in out if k in kinds]


def decay_weight(c, delta=0.5):
    return 2.0 ** (-max(c.parameter(1)) * delta / 2 - max(c.parameter(2)) * delta / 2)


def decay_mass(cap, delta=0.5):
    """Closed form of the sum of decay weights over max(i_t, j_t) <= cap_t."""
    out = 1.0
    for c in cap:
        out *= sum((2 * m + 1) * 2.0 ** (-m * delta / 2) for m in range(c + 1))
    return out


def ensemble_complexities(grid, cap):
    rng1 = range(cap[0] + 1)
    rng2 = range(cap[1] + 1)
    out = []
    for i1, j1 in itertools.product(rng1, rng1):
        for i2, j2 in itertools.product(rng2, rng2):
            c = ShiftComplexity((i1, i2), (j1, j2))
            if c.admissible(grid):
                out.append(c)
    return out


def sample_shift_ensemble(config, seed=0):
    """One random shift per admissible complexity with its decay weight.

    The kind is drawn among those allowed at that complexity: full standard
    and full mixed only at zero complexity, partial paraproducts only when
    one parameter has zero complexity.
    """
    if config.delta <= 0:
        raise ValueError("decay parameter must be positive")
    rng = np.random.default_rng(seed)
    out = []
    for c in ensemble_complexities(config.grid, config.cap):
        kinds = allowed_kinds(c, config.kinds)
        if not kinds:
            continue
        kind = kinds[int(rng.integers(len(kinds)))]
        sub = int(rng.integers(2 ** 31))
        orientation = None
        if kind == "full-mixed":
            orientation = [(0, 1), (1, 0)][int(rng.integers(2))]
        if kind == "partial" and c.total == 0:
            orientation = int(rng.integers(1, 3))
        out.append((decay_weight(c, config.delta),
                    make_shift(config.grid, kind, c, sub, config.mode, orientation)))
    return out


def ensemble_operator(samples, grid):
    """Weighted sum of the sampled shifts."""
    op = zero_operator(grid)
    for wgt, d in samples:
        op = add(op, scale(d.operator(), wgt))
    return op


def shift_one_weight_ratio(s, w, p=2.0, trials=8, seed=0):
    """||S : L^p(w) -> L^p(w)|| estimate for a ShiftDescriptor or shift object."""
    from .linops import operator_norm

    op = s.operator() if hasattr(s, "operator") else s
    return operator_norm(op, w, w, p, restarts=trials, seed=seed).value
