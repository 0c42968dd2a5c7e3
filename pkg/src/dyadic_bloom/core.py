"""Finite biparameter dyadic grids, Haar systems with signatures and averages.

Each parameter t lives on [0,1)^{n_t} cut into 2^{K_t n_t} cells.  Cells are
stored in Morton (Z-order) so that every dyadic cube is a contiguous block
of cells.  A grid function is a dense (N1, N2) array in that order.

Haar functions of one parameter are addressed by a single index r:

* r = 0 is the constant function 1 (norm one, the domain has measure one);
* the cancellative functions of level k occupy r in [2^{kn}, 2^{(k+1)n}),
  ordered by cube and then by signature, r = 2^{kn} + c (2^n - 1) + e.

A signature is stored as an integer bitmask e in [0, 2^n - 1); bit n-1-i is
the i-th coordinate of the bit-vector, so the excluded all-ones vector is
2^n - 1.  With this layout the coefficients of a grid function are a single
(N1, N2) matrix whose row/column 0 carry the mean and hybrid components.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np


MAX_AXIS_DIM = 2


# ---------------------------------------------------------------------------
# signatures

def signatures(n):
    """Cancellative signatures of an n-dimensional cube as bitmasks."""
    return list(range(2 ** n - 1))


def signature_bits(e, n):
    """Bit-vector (tuple of 0/1) of signature e."""
    return tuple((e >> (n - 1 - i)) & 1 for i in range(n))


def signature_from_bits(bits):
    n = len(bits)
    e = 0
    for i, b in enumerate(bits):
        e |= (int(b) & 1) << (n - 1 - i)
    if e == 2 ** n - 1:
        raise ValueError("the all-ones signature is not cancellative")
    return e


def signature_sum(e, d, n):
    """Combined signature: bit 1 where e and d agree, 0 where they differ."""
    return ~(e ^ d) & (2 ** n - 1)


def _parity(x):
    x = np.asarray(x, dtype=np.int64)
    out = np.zeros_like(x)
    while np.any(x):
        out ^= x & 1
        x = x >> 1
    return out


def child_sign(d, e, n):
    """Sign of h^e on the child with digit d (+1 on lower halves)."""
    mask = 2 ** n - 1
    return 1 - 2 * _parity(np.asarray(d) & (~e & mask))


# ---------------------------------------------------------------------------
# one parameter

@dataclass(frozen=True)
class Axis:
    """One parameter of the grid: [0,1)^n cut into 2^{Kn} cells."""

    n: int
    K: int

    def __post_init__(self):
        if self.n < 1 or self.n > MAX_AXIS_DIM:
            raise ValueError(f"axis dimension must be 1 or 2, got {self.n}")
        if self.K < 1:
            raise ValueError(f"depth must be at least 1, got {self.K}")

    @property
    def N(self):
        return 2 ** (self.K * self.n)

    @property
    def nsig(self):
        return 2 ** self.n - 1

    def cubes_at(self, k):
        return 2 ** (k * self.n)

    def cube_measure(self, k):
        return 2.0 ** (-k * self.n)

    def cube_cells(self, k, c):
        """Slice of Morton cells making up cube c of level k."""
        B = 2 ** ((self.K - k) * self.n)
        return slice(c * B, (c + 1) * B)

    def haar_index(self, k, c, e):
        if not 0 <= k < self.K:
            raise ValueError(f"Haar level {k} outside [0, {self.K})")
        if not 0 <= c < self.cubes_at(k) or not 0 <= e < self.nsig:
            raise ValueError("cube or signature out of range")
        return 2 ** (k * self.n) + c * self.nsig + e

    # -- Morton geometry --------------------------------------------------
    def morton_to_position(self, index, k):
        """Lattice coordinates (tuple) of Morton index at level k."""
        pos = [0] * self.n
        for s in range(k):
            d = (index >> ((k - 1 - s) * self.n)) & (2 ** self.n - 1)
            for i in range(self.n):
                pos[i] = 2 * pos[i] + ((d >> (self.n - 1 - i)) & 1)
        return tuple(pos)

    def position_to_morton(self, pos, k):
        if len(pos) != self.n:
            raise ValueError("position has the wrong number of coordinates")
        if any(p < 0 or p >= 2 ** k for p in pos):
            raise ValueError(f"position {pos} outside level {k}")
        index = 0
        for s in range(k):
            d = 0
            for i in range(self.n):
                d |= ((pos[i] >> (k - 1 - s)) & 1) << (self.n - 1 - i)
            index = (index << self.n) | d
        return index

    @cached_property
    def cell_positions(self):
        """(N, n) integer lattice coordinates of each Morton cell."""
        return np.array([self.morton_to_position(x, self.K) for x in range(self.N)],
                        dtype=np.int64).reshape(self.N, self.n)

    @cached_property
    def spatial_index(self):
        """Row-major spatial index of each Morton cell."""
        side = 2 ** self.K
        idx = np.zeros(self.N, dtype=np.int64)
        for i in range(self.n):
            idx = idx * side + self.cell_positions[:, i]
        return idx

    @cached_property
    def cell_centers(self):
        return (self.cell_positions + 0.5) / 2 ** self.K

    # -- Haar index tables ----------------------------------------------------
    @cached_property
    def haar_level(self):
        """Level of the cube of each Haar index; -1 for the constant."""
        lev = np.full(self.N, -1, dtype=np.int64)
        for k in range(self.K):
            lev[2 ** (k * self.n):2 ** ((k + 1) * self.n)] = k
        return lev

    @cached_property
    def haar_cube(self):
        """Cube index (within its level) of each Haar index; 0 for r=0."""
        cube = np.zeros(self.N, dtype=np.int64)
        for k in range(self.K):
            lo, hi = 2 ** (k * self.n), 2 ** ((k + 1) * self.n)
            cube[lo:hi] = np.arange(hi - lo) // self.nsig
        return cube

    @cached_property
    def haar_signature(self):
        sig = np.zeros(self.N, dtype=np.int64)
        sig[1:] = (np.arange(1, self.N) - 2 ** (self.haar_level[1:] * self.n)) % self.nsig
        return sig

    @cached_property
    def haar_measure(self):
        """|cube(r)|; 1 for the constant."""
        lev = np.maximum(self.haar_level, 0)
        return 2.0 ** (-lev * self.n)

    @cached_property
    def synthesis(self):
        """Hs[r, x] = h_r(x)."""
        n, K, N = self.n, self.K, self.N
        H = np.zeros((N, N))
        H[0] = 1.0
        x = np.arange(N)
        for k in range(K):
            B = 2 ** ((K - k) * n)
            c = x // B
            d = (x % B) // (B >> n)
            amp = 2.0 ** (k * n / 2)
            for e in range(self.nsig):
                r = 2 ** (k * n) + c * self.nsig + e
                H[r, x] = child_sign(d, e, n) * amp
        return H

    @cached_property
    def analysis(self):
        """Hc = Hs / N: coefficient extraction including the cell measure."""
        return self.synthesis / self.N

    @cached_property
    def cube_indicator(self):
        """Us[r, x] = 1_{cube(r)}(x) / |cube(r)|."""
        return (self.synthesis != 0) / self.haar_measure[:, None]

    @cached_property
    def cube_average(self):
        """Ua = Us / N: rows give averages over cube(r)."""
        return self.cube_indicator / self.N

    @cached_property
    def contains(self):
        """contains[r, s]: cube(s) is contained in cube(r) (r, s >= 1)."""
        lev, cube = self.haar_level, self.haar_cube
        out = np.zeros((self.N, self.N), dtype=bool)
        for r in range(1, self.N):
            shift = (lev - lev[r]) * self.n
            ok = (lev >= lev[r])
            out[r] = ok & ((cube >> np.where(ok, shift, 0)) == cube[r])
        out[0, :] = False
        out[:, 0] = False
        return out

    @cached_property
    def gamma_triples(self):
        """(out, b, f, value) index arrays for products h^e h^d, e != d.

        h_Q^e h_Q^d = |Q|^{-1/2} h_Q^{e+d}; empty when n = 1.
        """
        outs, bs, fs, vals = [], [], [], []
        for r in range(1, self.N):
            k, c, e = self.haar_level[r], self.haar_cube[r], self.haar_signature[r]
            base = r - e
            for d in range(self.nsig):
                if d == e:
                    continue
                outs.append(base + signature_sum(e, d, self.n))
                bs.append(r)
                fs.append(base + d)
                vals.append(2.0 ** (k * self.n / 2))
        return (np.array(outs, dtype=np.int64), np.array(bs, dtype=np.int64),
                np.array(fs, dtype=np.int64), np.array(vals))

    @cached_property
    def gamma_incidence(self):
        """Scatter matrix (N, T) with the |Q|^{-1/2} factors."""
        o, _, _, v = self.gamma_triples
        G = np.zeros((self.N, len(o)))
        G[o, np.arange(len(o))] = v
        return G

    # -- cube tables ----------------------------------------------------------
    def cube_offset(self, k):
        return (2 ** (k * self.n) - 1) // (2 ** self.n - 1)

    @cached_property
    def cube_count(self):
        return self.cube_offset(self.K + 1)

    @cached_property
    def cube_table(self):
        """(level, index) of every cube id, levels 0..K."""
        lev = np.zeros(self.cube_count, dtype=np.int64)
        idx = np.zeros(self.cube_count, dtype=np.int64)
        for k in range(self.K + 1):
            o = self.cube_offset(k)
            lev[o:o + self.cubes_at(k)] = k
            idx[o:o + self.cubes_at(k)] = np.arange(self.cubes_at(k))
        return lev, idx

    @cached_property
    def cube_indicators(self):
        """Uc[q, x] = 1_{Q_q}(x)/|Q_q| for all cubes of levels 0..K."""
        lev, idx = self.cube_table
        x = np.arange(self.N)
        U = ((x[None, :] >> ((self.K - lev[:, None]) * self.n)) == idx[:, None]).astype(float)
        return U * (2.0 ** (lev * self.n))[:, None]

    @cached_property
    def haar_cube_id(self):
        """Global cube id of each Haar index (r >= 1); 0 for r = 0."""
        out = np.zeros(self.N, dtype=np.int64)
        out[1:] = np.array([self.cube_offset(k) for k in self.haar_level[1:]]) + self.haar_cube[1:]
        return out

    # -- one-parameter transforms ----------------------------------------------
    def forward(self, u):
        """Haar coefficients along the last axis of u."""
        return np.asarray(u) @ self.analysis.T

    def inverse(self, c):
        return np.asarray(c) @ self.synthesis

    def average(self, u, k, c):
        return np.asarray(u)[..., self.cube_cells(k, c)].mean(axis=-1)

    def ancestor_values(self, k, c):
        """Vector v with v[r] = h_r(Q) for r = 0 and cubes strictly above Q."""
        x = self.cube_cells(k, c).start
        v = self.synthesis[:, x].copy()
        v[self.haar_level >= k] = 0.0
        v[0] = 1.0
        return v

    def inside_mask(self, k, c):
        """Haar indices whose cube lies inside cube c of level k."""
        lev, cube = self.haar_level, self.haar_cube
        ok = lev >= k
        return ok & ((cube >> np.where(ok, (lev - k) * self.n, 0)) == c)

    def maximal(self, u, levels=None):
        """One-parameter dyadic maximal function along the last axis."""
        a = np.abs(np.asarray(u, dtype=float))
        out = a.copy()
        for k in range(self.K + 1) if levels is None else levels:
            B = 2 ** ((self.K - k) * self.n)
            m = a.reshape(a.shape[:-1] + (self.N // B, B)).mean(axis=-1)
            out = np.maximum(out, np.repeat(m, B, axis=-1))
        return out


# ---------------------------------------------------------------------------
# grids, cubes and rectangles

@dataclass(frozen=True)
class CubeId:
    """Dyadic cube of parameter 1 or 2 given by level and lattice position."""

    parameter: int
    level: int
    position: tuple

    def __post_init__(self):
        if self.parameter not in (1, 2):
            raise ValueError("parameter must be 1 or 2")
        if self.level < 0 or any(p < 0 or p >= 2 ** self.level for p in self.position):
            raise ValueError(f"invalid cube position {self.position} at level {self.level}")
        object.__setattr__(self, "position", tuple(int(p) for p in self.position))

    def ancestor(self, j):
        if j > self.level:
            raise ValueError("ancestor above level 0")
        return CubeId(self.parameter, self.level - j, tuple(p >> j for p in self.position))

    def children(self):
        n = len(self.position)
        out = []
        for d in range(2 ** n):
            bits = signature_bits(d, n)
            out.append(CubeId(self.parameter, self.level + 1,
                              tuple(2 * p + b for p, b in zip(self.position, bits))))
        return out

    def descendants(self, j):
        cubes = [self]
        for _ in range(j):
            cubes = [ch for q in cubes for ch in q.children()]
        return cubes

    def contains(self, other):
        if other.parameter != self.parameter or other.level < self.level:
            return False
        return other.ancestor(other.level - self.level) == self


@dataclass(frozen=True)
class Rectangle:
    q1: CubeId
    q2: CubeId

    def __post_init__(self):
        if self.q1.parameter != 1 or self.q2.parameter != 2:
            raise ValueError("rectangle needs a parameter-1 and a parameter-2 cube")


@dataclass(frozen=True)
class DyadicGrid:
    """Biparameter grid on [0,1)^{n1} x [0,1)^{n2} with depths (K1, K2)."""

    depths: tuple = (3, 3)
    axis_dims: tuple = (1, 1)

    def __post_init__(self):
        object.__setattr__(self, "depths", tuple(int(k) for k in self.depths))
        object.__setattr__(self, "axis_dims", tuple(int(n) for n in self.axis_dims))
        if len(self.depths) != 2 or len(self.axis_dims) != 2:
            raise ValueError("a biparameter grid needs two depths and two axis dimensions")
        # validates ranges
        _ = self.axes

    @cached_property
    def axes(self):
        return (_axis(self.axis_dims[0], self.depths[0]),
                _axis(self.axis_dims[1], self.depths[1]))

    @property
    def shape(self):
        return (self.axes[0].N, self.axes[1].N)

    @property
    def size(self):
        return self.shape[0] * self.shape[1]

    def transpose(self):
        return DyadicGrid(self.depths[::-1], self.axis_dims[::-1])

    def axis(self, parameter):
        return self.axes[parameter - 1]

    def check_cube(self, Q):
        ax = self.axis(Q.parameter)
        if Q.level > ax.K or len(Q.position) != ax.n:
            raise ValueError(f"cube {Q} is not in the grid")
        return ax.position_to_morton(Q.position, Q.level)

    def cube(self, parameter, level, index):
        """CubeId from its Morton index within the level."""
        ax = self.axis(parameter)
        return CubeId(parameter, level, ax.morton_to_position(index, level))

    def rectangle(self, level1, index1, level2, index2):
        return Rectangle(self.cube(1, level1, index1), self.cube(2, level2, index2))

    def rectangles(self, max_level=None):
        """All dyadic rectangles (levels 0..K in each parameter)."""
        L1, L2 = (self.depths if max_level is None else max_level)
        for k1 in range(L1 + 1):
            for c1 in range(self.axes[0].cubes_at(k1)):
                for k2 in range(L2 + 1):
                    for c2 in range(self.axes[1].cubes_at(k2)):
                        yield self.rectangle(k1, c1, k2, c2)

    def to_dict(self):
        return {"n1": self.axis_dims[0], "n2": self.axis_dims[1],
                "K1": self.depths[0], "K2": self.depths[1]}


_AXES = {}


def _axis(n, K):
    # shared per (n, K) so that the cached tables are built once
    key = (n, K)
    if key not in _AXES:
        _AXES[key] = Axis(n, K)
    return _AXES[key]


def rectangle_slices(grid, R):
    i1 = grid.check_cube(R.q1)
    i2 = grid.check_cube(R.q2)
    return grid.axes[0].cube_cells(R.q1.level, i1), grid.axes[1].cube_cells(R.q2.level, i2)


# ---------------------------------------------------------------------------
# grid functions

class GridFunction:
    """Real function constant on the cells of a DyadicGrid (Morton order)."""

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"values of shape {values.shape} do not match grid {grid.shape}")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    def __repr__(self):
        return f"GridFunction(grid={self.grid}, norm={np.linalg.norm(self.values):.4g})"

    # construction
    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_spatial(cls, grid, array):
        """Build from an array indexed by lattice coordinates (row-major)."""
        a1, a2 = grid.axes
        flat = np.asarray(array, dtype=float).reshape(a1.N, a2.N)
        return cls(grid, flat[np.ix_(a1.spatial_index, a2.spatial_index)])

    @classmethod
    def sample(cls, grid, fn):
        """Evaluate fn at cell centers.

        fn receives x1 of shape (N1, 1) and x2 of shape (1, N2) when the
        parameter is one-dimensional, and an extra trailing coordinate axis
        when it is two-dimensional.
        """
        c1, c2 = grid.axes[0].cell_centers, grid.axes[1].cell_centers
        x1 = c1[:, None, 0] if grid.axis_dims[0] == 1 else c1[:, None, :]
        x2 = c2[None, :, 0] if grid.axis_dims[1] == 1 else c2[None, :, :]
        return cls(grid, np.broadcast_to(fn(x1, x2), grid.shape))

    def spatial(self):
        """Values rearranged to lattice coordinates, shape (2^K1,)*n1 + (2^K2,)*n2."""
        a1, a2 = self.grid.axes
        out = np.empty(self.grid.shape)
        out[np.ix_(a1.spatial_index, a2.spatial_index)] = self.values
        shape = (2 ** a1.K,) * a1.n + (2 ** a2.K,) * a2.n
        return out.reshape(shape)

    def transpose(self):
        return GridFunction(self.grid.transpose(), self.values.T)

    # arithmetic
    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise ValueError("grid mismatch")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.grid, self.values / self._other(other))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __abs__(self):
        return GridFunction(self.grid, np.abs(self.values))

    def inner(self, other):
        """Unweighted L^2 pairing on the unit domain."""
        return float(np.sum(self.values * self._other(other)) / self.grid.size)

    def norm(self):
        return float(np.sqrt(self.inner(self)))

    def mean(self):
        return float(self.values.mean())

    # serialization
    def to_json(self):
        d = self.grid.to_dict()
        d["values"] = self.spatial().reshape(-1).tolist()
        return json.dumps(d)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        grid = DyadicGrid((d["K1"], d["K2"]), (d["n1"], d["n2"]))
        return cls.from_spatial(grid, np.asarray(d["values"], dtype=float))

    def to_csv(self):
        """Flat row-major CSV over lattice coordinates, one row per parameter-1 cell."""
        rows = self.spatial().reshape(self.grid.shape)
        return "\n".join(",".join(repr(float(v)) for v in row) for row in rows) + "\n"

    @classmethod
    def from_csv(cls, grid, text):
        rows = [[float(v) for v in line.split(",")] for line in text.strip().splitlines()]
        return cls.from_spatial(grid, np.array(rows))


# ---------------------------------------------------------------------------
# Haar spectra

class HaarSpectrum:
    """All Haar coefficients of a grid function as an (N1, N2) matrix.

    coeffs[0, 0] is the mean, coeffs[r1, 0] the hybrid components
    <f, h_{Q1} (x) 1>, coeffs[0, r2] the symmetric ones and
    coeffs[r1, r2] with r1, r2 >= 1 the cancellative coefficients.
    """

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != grid.shape:
            raise ValueError(f"spectrum of shape {coeffs.shape} does not match grid {grid.shape}")
        coeffs = coeffs.copy()
        coeffs.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, name, value):
        raise AttributeError("HaarSpectrum is immutable")

    @property
    def mean(self):
        return float(self.coeffs[0, 0])

    @property
    def hybrid1(self):
        return self.coeffs[1:, 0]

    @property
    def hybrid2(self):
        return self.coeffs[0, 1:]

    @property
    def cancellative(self):
        return self.coeffs[1:, 1:]

    def block(self, l1, l2):
        """Cancellative coefficients of levels (l1, l2), shape (cubes1, sig1, cubes2, sig2)."""
        a1, a2 = self.grid.axes
        s1 = slice(2 ** (l1 * a1.n), 2 ** ((l1 + 1) * a1.n))
        s2 = slice(2 ** (l2 * a2.n), 2 ** ((l2 + 1) * a2.n))
        return self.coeffs[s1, s2].reshape(a1.cubes_at(l1), a1.nsig, a2.cubes_at(l2), a2.nsig)

    def coefficient(self, R, e1=0, e2=0):
        a1, a2 = self.grid.axes
        r1 = a1.haar_index(R.q1.level, self.grid.check_cube(R.q1), e1)
        r2 = a2.haar_index(R.q2.level, self.grid.check_cube(R.q2), e2)
        return float(self.coeffs[r1, r2])

    def to_dict(self):
        a1, a2 = self.grid.axes
        blocks = {}
        for l1 in range(a1.K):
            for l2 in range(a2.K):
                blocks[f"{l1},{l2}"] = self.block(l1, l2).reshape(-1).tolist()
        hyb1 = {str(l1): self.coeffs[2 ** (l1 * a1.n):2 ** ((l1 + 1) * a1.n), 0].tolist()
                for l1 in range(a1.K)}
        hyb2 = {str(l2): self.coeffs[0, 2 ** (l2 * a2.n):2 ** ((l2 + 1) * a2.n)].tolist()
                for l2 in range(a2.K)}
        d = self.grid.to_dict()
        d.update(mean=self.mean, hybrid1=hyb1, hybrid2=hyb2, blocks=blocks)
        return d

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        grid = DyadicGrid((d["K1"], d["K2"]), (d["n1"], d["n2"]))
        a1, a2 = grid.axes
        C = np.zeros(grid.shape)
        C[0, 0] = d["mean"]
        for key, vals in d["hybrid1"].items():
            l1 = int(key)
            C[2 ** (l1 * a1.n):2 ** ((l1 + 1) * a1.n), 0] = vals
        for key, vals in d["hybrid2"].items():
            l2 = int(key)
            C[0, 2 ** (l2 * a2.n):2 ** ((l2 + 1) * a2.n)] = vals
        for key, vals in d["blocks"].items():
            l1, l2 = (int(v) for v in key.split(","))
            C[2 ** (l1 * a1.n):2 ** ((l1 + 1) * a1.n),
              2 ** (l2 * a2.n):2 ** ((l2 + 1) * a2.n)] = \
                np.asarray(vals).reshape(a1.cubes_at(l1) * a1.nsig, a2.cubes_at(l2) * a2.nsig)
        return cls(grid, C)


def _values(f, grid=None):
    if isinstance(f, GridFunction):
        if grid is not None and f.grid != grid:
            raise ValueError("grid mismatch")
        return f.values
    return np.asarray(f, dtype=float)


def haar_forward(f):
    """Haar spectrum of a GridFunction."""
    if not isinstance(f, GridFunction):
        raise TypeError("haar_forward expects a GridFunction")
    a1, a2 = f.grid.axes
    return HaarSpectrum(f.grid, a1.analysis @ f.values @ a2.analysis.T)


def haar_inverse(s):
    if not isinstance(s, HaarSpectrum):
        raise TypeError("haar_inverse expects a HaarSpectrum")
    a1, a2 = s.grid.axes
    return GridFunction(s.grid, a1.synthesis.T @ s.coeffs @ a2.synthesis)


# batched helpers on raw arrays (..., N1, N2) used throughout the package
def coeffs_hh(grid, F):
    a1, a2 = grid.axes
    return a1.analysis @ F @ a2.analysis.T


def synth_hh(grid, C):
    a1, a2 = grid.axes
    return a1.synthesis.T @ C @ a2.synthesis


def cancellative_part(grid, F):
    """Projection onto the fully cancellative functions (raw arrays)."""
    C = coeffs_hh(grid, F)
    C = np.array(C)
    C[..., 0, :] = 0.0
    C[..., :, 0] = 0.0
    return synth_hh(grid, C)


def project_fully_cancellative(f):
    """Drop mean and hybrid components: zero slice averages in each variable."""
    return GridFunction(f.grid, cancellative_part(f.grid, f.values))


def is_fully_cancellative(f, tol=1e-12):
    v = f.values
    scale = max(1.0, float(np.abs(v).max()))
    return (np.abs(v.mean(axis=0)).max() <= tol * scale and
            np.abs(v.mean(axis=1)).max() <= tol * scale)


def random_function(grid, rng, cancellative=False):
    f = GridFunction(grid, rng.standard_normal(grid.shape))
    return project_fully_cancellative(f) if cancellative else f


def random_series(grid, seed=0, smoothness=0.5, cancellative=True):
    """Random Haar series with f^(R) ~ N(0, |R|) 2^{-smoothness (l1 + l2)}.

    Blocks of coefficients are drawn per level pair from streams seeded by
    (seed, l1, l2), so refining the grid only adds finer levels.  Unless
    cancellative, the hybrid and mean components are drawn the same way
    with index -1 standing for the constant.
    """
    a1, a2 = grid.axes
    C = np.zeros(grid.shape)
    lo = 0 if cancellative else -1

    def rows(axis, l):
        if l < 0:
            return slice(0, 1), 1.0
        return slice(2 ** (l * axis.n), 2 ** ((l + 1) * axis.n)), axis.cube_measure(l)

    for l1 in range(lo, a1.K):
        s1, m1 = rows(a1, l1)
        for l2 in range(lo, a2.K):
            s2, m2 = rows(a2, l2)
            rng = np.random.default_rng([seed, l1 + 1, l2 + 1])
            amp = np.sqrt(m1 * m2) * 2.0 ** (-smoothness * (max(l1, 0) + max(l2, 0)))
            C[s1, s2] = amp * rng.standard_normal((s1.stop - s1.start, s2.stop - s2.start))
    return GridFunction(grid, a1.synthesis.T @ C @ a2.synthesis)


def random_spectrum(grid, rng):
    return HaarSpectrum(grid, rng.standard_normal(grid.shape))


def haar_tensor(grid, Q1, e1, Q2, e2):
    """h_{Q1}^{e1} (x) h_{Q2}^{e2} as a GridFunction."""
    a1, a2 = grid.axes
    r1 = a1.haar_index(Q1.level, grid.check_cube(Q1), e1)
    r2 = a2.haar_index(Q2.level, grid.check_cube(Q2), e2)
    return GridFunction(grid, np.outer(a1.synthesis[r1], a2.synthesis[r2]))


def indicator(grid, R):
    s1, s2 = rectangle_slices(grid, R)
    v = np.zeros(grid.shape)
    v[s1, s2] = 1.0
    return GridFunction(grid, v)


# ---------------------------------------------------------------------------
# averages

def rectangle_average(f, R):
    """<f>_R by direct summation over the cells of R."""
    s1, s2 = rectangle_slices(f.grid, R)
    return float(f.values[s1, s2].mean())


def rectangle_average_series(s, R):
    """<f>_R from the Haar series: coefficients of strict ancestors times Haar values.

    The constant and hybrid components enter through the r = 0 slots.
    """
    grid = s.grid
    a1, a2 = grid.axes
    v1 = a1.ancestor_values(R.q1.level, grid.check_cube(R.q1))
    v2 = a2.ancestor_values(R.q2.level, grid.check_cube(R.q2))
    return float(v1 @ s.coeffs @ v2)


def average_difference_series(axis, coeffs, inner, outer):
    """<u>_Q - <u>_R for Q strictly inside R from one-parameter coefficients.

    inner, outer are (level, index) pairs.  Sums u^(P) h_P(Q) over the cubes
    P with Q strictly inside P and P inside R.
    """
    (kq, cq), (kr, cr) = inner, outer
    if not (kq > kr and (cq >> ((kq - kr) * axis.n)) == cr):
        raise ValueError("inner cube must lie strictly inside the outer cube")
    x = axis.cube_cells(kq, cq).start
    sel = (axis.haar_level >= kr) & (axis.haar_level < kq) & axis.inside_mask(kr, cr)
    return float(np.sum(np.asarray(coeffs)[..., sel] * axis.synthesis[sel, x], axis=-1))


def slice_average(f, Q):
    """m_Q f: average over the cube Q of one parameter, a function of the other.

    Returns a 1-D array over the Morton cells of the remaining parameter.
    """
    i = f.grid.check_cube(Q)
    ax = f.grid.axis(Q.parameter)
    cells = ax.cube_cells(Q.level, i)
    if Q.parameter == 1:
        return f.values[cells, :].mean(axis=0)
    return f.values[:, cells].mean(axis=1)


@dataclass(frozen=True)
class OscillationSplit:
    cancellative: GridFunction
    slice1: GridFunction
    slice2: GridFunction

    def total(self):
        return self.cancellative + self.slice1 + self.slice2


def local_mean_oscillation_expansion(f, R):
    """The three addends of 1_R (f - <f>_R).

    * cancellative: Haar block over P1 inside Q1, P2 inside Q2;
    * slice1: 1_R (m_{Q1} f(x2) - <f>_R);
    * slice2: 1_R (m_{Q2} f(x1) - <f>_R).
    """
    grid = f.grid
    a1, a2 = grid.axes
    i1, i2 = grid.check_cube(R.q1), grid.check_cube(R.q2)
    s1, s2 = a1.cube_cells(R.q1.level, i1), a2.cube_cells(R.q2.level, i2)
    C = coeffs_hh(grid, f.values)
    m1 = a1.inside_mask(R.q1.level, i1)
    m2 = a2.inside_mask(R.q2.level, i2)
    block = synth_hh(grid, C * np.outer(m1, m2))
    avg = f.values[s1, s2].mean()
    t2 = np.zeros(grid.shape)
    t3 = np.zeros(grid.shape)
    t2[s1, s2] = (f.values[s1, s2].mean(axis=0) - avg)[None, :]
    t3[s1, s2] = (f.values[s1, s2].mean(axis=1) - avg)[:, None]
    return OscillationSplit(GridFunction(grid, block), GridFunction(grid, t2), GridFunction(grid, t3))


# ---------------------------------------------------------------------------
# martingale transforms

class MartingaleMask:
    """Signs applied to Haar coefficients; built per parameter or jointly."""

    __slots__ = ("grid", "signs")

    def __init__(self, grid, signs):
        signs = np.asarray(signs, dtype=float)
        if signs.shape != grid.shape:
            raise ValueError("mask shape does not match grid")
        if not np.all(np.abs(signs) == 1):
            raise ValueError("mask entries must be +1 or -1")
        signs = signs.copy()
        signs[0, 0] = 1.0
        signs.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "signs", signs)

    def __setattr__(self, name, value):
        raise AttributeError("MartingaleMask is immutable")

    @classmethod
    def joint(cls, grid, tau):
        """tau: signs for the cancellative block, shape (N1-1, N2-1)."""
        s = np.ones(grid.shape)
        s[1:, 1:] = tau
        return cls(grid, s)

    @classmethod
    def parameter(cls, grid, t, tau):
        """tau: signs for the Haar indices 1..N_t-1 of parameter t."""
        s = np.ones(grid.shape)
        tau = np.concatenate([[1.0], np.asarray(tau, dtype=float)])
        if t == 1:
            s *= tau[:, None]
        else:
            s *= tau[None, :]
        return cls(grid, s)

    @classmethod
    def random(cls, grid, rng):
        return cls.joint(grid, rng.choice([-1.0, 1.0], size=(grid.shape[0] - 1, grid.shape[1] - 1)))


def martingale_transform(f, mask):
    C = coeffs_hh(f.grid, f.values)
    return GridFunction(f.grid, synth_hh(f.grid, C * mask.signs))


# ---------------------------------------------------------------------------
# rectangle tables

def block_means(grid, V):
    """Averages of V over every dyadic rectangle, grouped by level pair.

    Returns a nested list A with A[k1][k2] of shape (cubes1, cubes2) for
    k1 in 0..K1 and k2 in 0..K2.  Leading batch axes of V are kept.
    """
    a1, a2 = grid.axes
    V = np.asarray(V, dtype=float)
    lead = V.shape[:-2]
    out = []
    for k1 in range(a1.K + 1):
        c1 = a1.cubes_at(k1)
        M1 = V.reshape(lead + (c1, a1.N // c1, a2.N)).mean(axis=-2)
        row = []
        for k2 in range(a2.K + 1):
            c2 = a2.cubes_at(k2)
            row.append(M1.reshape(lead + (c1, c2, a2.N // c2)).mean(axis=-1))
        out.append(row)
    return out


def spread(grid, A, k1, k2):
    """Broadcast per-rectangle values of levels (k1, k2) back to cells."""
    a1, a2 = grid.axes
    B1 = a1.N // a1.cubes_at(k1)
    B2 = a2.N // a2.cubes_at(k2)
    return np.repeat(np.repeat(A, B1, axis=-2), B2, axis=-1)
