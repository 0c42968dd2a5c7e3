"""Brute-force reference implementations on the spatial lattice.

Everything here is built from explicit cubes, indicator vectors and Haar
functions written out cell by cell, with plain loops over rectangles.  No
library matrices are used; only GridFunction.spatial/from_spatial convert
between layouts.  Slow by design; meant for K <= 3.
"""
import itertools
from types import SimpleNamespace

import numpy as np

from dyadic_bloom import GridFunction


def to_lattice(f):
    """(S1, S2) array of f in row-major lattice order."""
    a1, a2 = f.grid.axes
    return f.spatial().reshape((2 ** a1.K) ** a1.n, (2 ** a2.K) ** a2.n)


def from_lattice(grid, A):
    return GridFunction.from_spatial(grid, A)


def conj_exp(p):
    return p / (p - 1)


class LatticeAxis:
    """Cubes and Haar functions of [0,1)^n at depth K, cells in row-major order."""

    def __init__(self, n, K):
        self.n, self.K = n, K
        side = 2 ** K
        self.size = side ** n
        self.pos = np.array(list(itertools.product(range(side), repeat=n)), dtype=int).reshape(-1, n)

    def cubes(self, k):
        return list(itertools.product(range(2 ** k), repeat=self.n))

    def all_cubes(self):
        return [(k, q) for k in range(self.K + 1) for q in self.cubes(k)]

    def mask(self, k, q):
        return np.all((self.pos >> (self.K - k)) == np.array(q), axis=1)

    def measure(self, k):
        return 2.0 ** (-k * self.n)

    def avg_vec(self, k, q):
        """1_Q / |Q|."""
        return self.mask(k, q) / self.measure(k)

    def signatures(self):
        return [b for b in itertools.product((0, 1), repeat=self.n) if not all(b)]

    def haar(self, k, q, bits):
        m = self.mask(k, q).astype(float)
        child = (self.pos >> (self.K - k - 1)) & 1
        sign = np.ones(self.size)
        for i, b in enumerate(bits):
            if b == 0:
                sign *= 1 - 2 * child[:, i]
        return m * sign * self.measure(k) ** -0.5

    def haars(self):
        """[(k, q, bits, vector)] for all cancellative Haar functions."""
        return [(k, q, e, self.haar(k, q, e)) for k in range(self.K)
                for q in self.cubes(k) for e in self.signatures()]

    def inside(self, inner, outer):
        (ki, qi), (ko, qo) = inner, outer
        return ki >= ko and all((a >> (ki - ko)) == b for a, b in zip(qi, qo))

    # -- decoding library indices ------------------------------------------
    def morton_pos(self, x, k):
        pos = [0] * self.n
        for s in range(k):
            d = (x >> ((k - 1 - s) * self.n)) & (2 ** self.n - 1)
            for i in range(self.n):
                pos[i] = 2 * pos[i] + ((d >> (self.n - 1 - i)) & 1)
        return tuple(pos)

    def decode(self, r):
        """Haar index -> (level, cube position, signature bits)."""
        n, ns = self.n, 2 ** self.n - 1
        k = 0
        while r >= 2 ** ((k + 1) * n):
            k += 1
        off = r - 2 ** (k * n)
        c, e = divmod(off, ns)
        bits = tuple((e >> (n - 1 - i)) & 1 for i in range(n))
        return k, self.morton_pos(c, k), bits

    def morton_to_lattice(self):
        """Lattice (row-major) index of each Morton cell."""
        side = 2 ** self.K
        out = []
        for x in range(self.size):
            p = self.morton_pos(x, self.K)
            idx = 0
            for c in p:
                idx = idx * side + c
            out.append(idx)
        return np.array(out)


def axes_of(grid):
    return tuple(LatticeAxis(n, K) for n, K in zip(grid.axis_dims, grid.depths))


def pair(F, u, v):
    """Integral of F against u (x) v (cell measure 1/size)."""
    return float(u @ F @ v) / F.size


# ---------------------------------------------------------------------------
# Haar algebra

def haar_coefficients(f):
    """{(k1, q1, e1, k2, q2, e2): coefficient} over cancellative rectangles."""
    L1, L2 = axes_of(f.grid)
    F = to_lattice(f)
    return {(k1, q1, e1, k2, q2, e2): pair(F, h1, h2)
            for k1, q1, e1, h1 in L1.haars() for k2, q2, e2, h2 in L2.haars()}


def rectangle_mean(F, L1, L2, R):
    (k1, q1), (k2, q2) = R
    m1, m2 = L1.mask(k1, q1), L2.mask(k2, q2)
    return float(F[np.ix_(m1, m2)].mean())


# ---------------------------------------------------------------------------
# paraproducts

def _terms(L, mode):
    """Per-parameter (symbol functional, f functional, output) triples."""
    out = []
    for k, q, e, h in L.haars():
        if mode == "A":
            out.append((h, L.avg_vec(k, q), h))
        elif mode == "B":
            out.append((h, h, L.avg_vec(k, q)))
        elif mode == "D":
            out.append((L.avg_vec(k, q), h, h))
        elif mode == "C":
            for d in L.signatures():
                if d != e:
                    hd = L.haar(k, q, d)
                    out.append((h, hd, h * hd))
    return out


def paraproduct(modes, b, f):
    """Sum over Haar terms <b, beta1 x beta2> <f, phi1 x phi2> o1 x o2."""
    L1, L2 = axes_of(f.grid)
    B, F = to_lattice(b), to_lattice(f)
    T1, T2 = _terms(L1, modes[0]), _terms(L2, modes[1])
    out = np.zeros(F.shape)
    for b1, f1, o1 in T1:
        for b2, f2, o2 in T2:
            out += pair(B, b1, b2) * pair(F, f1, f2) * np.outer(o1, o2)
    return from_lattice(f.grid, out)


# ---------------------------------------------------------------------------
# shifts

def _entry(L, r):
    k, q, e = L.decode(int(r))
    return (k, q), L.haar(k, q, e)


def cancellative_shift(s, f):
    """Sum of a * f^(P1 x P2) h_Q1 (x) h_Q2 over the entry tables, with geometry checks."""
    L1, L2 = axes_of(f.grid)
    F = to_lattice(f)
    e1, e2 = s.entries
    (i1, i2), (j1, j2) = s.complexity.i, s.complexity.j
    rows = []
    for L, ent, i, j in ((L1, e1, i1, j1), (L2, e2, i2, j2)):
        items = []
        for p, q, rc, rl in zip(ent.p, ent.q, ent.root, ent.root_level):
            (kp, cp), hp = _entry(L, p)
            (kq, cq), hq = _entry(L, q)
            root = (int(rl), L.morton_pos(int(rc), int(rl)))
            assert kp == root[0] + i and kq == root[0] + j
            assert L.inside((kp, cp), root) and L.inside((kq, cq), root)
            items.append((hp, hq))
        rows.append(items)
    out = np.zeros(F.shape)
    for a, (hp1, hq1) in enumerate(rows[0]):
        for b_, (hp2, hq2) in enumerate(rows[1]):
            c = s.coeffs[a, b_]
            if c:
                out += c * pair(F, hp1, hp2) * np.outer(hq1, hq2)
    return from_lattice(f.grid, out)


def partial_paraproduct(sym, f):
    """Sum a_{PQR1}^(R2) f^(P1 x R2) h_Q1 (x) 1_R2/|R2| (orientation 1)."""
    if sym.orientation == 2:
        return partial_paraproduct_swapped(sym, f)
    L1, L2 = axes_of(f.grid)
    F = to_lattice(f)
    perm = L2.morton_to_lattice()
    out = np.zeros(F.shape)
    for idx, (p, q) in enumerate(zip(sym.entries.p, sym.entries.q)):
        _, hp = _entry(L1, p)
        _, hq = _entry(L1, q)
        a = np.zeros(L2.size)
        a[perm] = sym.symbols[idx]
        for k2, q2, e2, h2 in L2.haars():
            coef = float(a @ h2) / L2.size
            if coef:
                out += coef * pair(F, hp, h2) * np.outer(hq, L2.avg_vec(k2, q2))
    return from_lattice(f.grid, out)


def partial_paraproduct_swapped(sym, f):
    ft = f.transpose()
    s1 = SimpleNamespace(orientation=1, entries=sym.entries, symbols=sym.symbols)
    return partial_paraproduct(s1, ft).transpose()


# ---------------------------------------------------------------------------
# square and maximal functions

def square_function(f, scope="biparameter"):
    L1, L2 = axes_of(f.grid)
    F = to_lattice(f)
    S2 = np.zeros(F.shape)
    if scope == "biparameter":
        for k1, q1, _, h1 in L1.haars():
            for k2, q2, _, h2 in L2.haars():
                S2 += pair(F, h1, h2) ** 2 * np.outer(L1.avg_vec(k1, q1), L2.avg_vec(k2, q2))
    elif scope == 1:
        for k1, q1, _, h1 in L1.haars():
            H = h1 @ F / L1.size
            S2 += np.outer(L1.avg_vec(k1, q1), H ** 2)
    else:
        for k2, q2, _, h2 in L2.haars():
            H = F @ h2 / L2.size
            S2 += np.outer(H ** 2, L2.avg_vec(k2, q2))
    return from_lattice(f.grid, np.sqrt(S2))


def strong_maximal(f):
    L1, L2 = axes_of(f.grid)
    A = np.abs(to_lattice(f))
    out = np.zeros(A.shape)
    for k1, q1 in L1.all_cubes():
        m1 = L1.mask(k1, q1)
        for k2, q2 in L2.all_cubes():
            m2 = L2.mask(k2, q2)
            box = np.ix_(m1, m2)
            out[box] = np.maximum(out[box], A[box].mean())
    return from_lattice(f.grid, out)


def maximal_1d(L, g):
    """One-parameter dyadic maximal function of a 1-D lattice vector."""
    out = np.zeros(L.size)
    for k, q in L.all_cubes():
        m = L.mask(k, q)
        out[m] = np.maximum(out[m], np.abs(g[m]).mean())
    return out


def parameter_maximal(f, t):
    L1, L2 = axes_of(f.grid)
    A = to_lattice(f)
    if t == 1:
        out = np.stack([maximal_1d(L1, A[:, x]) for x in range(L2.size)], axis=1)
    else:
        out = np.stack([maximal_1d(L2, A[x]) for x in range(L1.size)], axis=0)
    return from_lattice(f.grid, out)


def _root_cubes(L, i, j):
    return [(l, q) for l in range(L.K - max(i, j)) for q in L.cubes(l)]


def _children_at(L, root, depth):
    l, q = root
    return [(l + depth, c) for c in L.cubes(l + depth) if L.inside((l + depth, c), root)]


def shifted_square_function(f, c):
    """Sum over roots of (sum_{P in (R)_i} |f^(P)|)^2 (sum_{Q in (R)_j} 1_Q/|Q|)."""
    L1, L2 = axes_of(f.grid)
    F = to_lattice(f)
    (i1, j1), (i2, j2) = c.parameter(1), c.parameter(2)
    S2 = np.zeros(F.shape)
    for R1 in _root_cubes(L1, i1, j1):
        P1 = [L1.haar(k, q, e) for k, q in _children_at(L1, R1, i1) for e in L1.signatures()]
        Q1 = sum(L1.avg_vec(*Q) for Q in _children_at(L1, R1, j1))
        for R2 in _root_cubes(L2, i2, j2):
            P2 = [L2.haar(k, q, e) for k, q in _children_at(L2, R2, i2) for e in L2.signatures()]
            Q2 = sum(L2.avg_vec(*Q) for Q in _children_at(L2, R2, j2))
            inner = sum(abs(pair(F, u, v)) for u in P1 for v in P2)
            S2 += inner ** 2 * np.outer(Q1, Q2)
    return from_lattice(f.grid, np.sqrt(S2))


def mixed_square_maximal(f):
    """[SM] f = (sum_{Q1} (M_{D2} H_{Q1} f)^2 1_{Q1}/|Q1|)^{1/2}."""
    L1, L2 = axes_of(f.grid)
    F = to_lattice(f)
    S2 = np.zeros(F.shape)
    for k1, q1, _, h1 in L1.haars():
        H = h1 @ F / L1.size
        S2 += np.outer(L1.avg_vec(k1, q1), maximal_1d(L2, H) ** 2)
    return from_lattice(f.grid, np.sqrt(S2))


# ---------------------------------------------------------------------------
# weights and BMO norms

def rectangles(L1, L2):
    for k1, q1 in L1.all_cubes():
        for k2, q2 in L2.all_cubes():
            yield L1.mask(k1, q1), L2.mask(k2, q2)


def ap_characteristic(w, p):
    L1, L2 = axes_of(w.grid)
    W = to_lattice(w.function())
    pd = conj_exp(p)
    best = 0.0
    for m1, m2 in rectangles(L1, L2):
        box = W[np.ix_(m1, m2)]
        best = max(best, box.mean() * (box ** (1 - pd)).mean() ** (p - 1))
    return best


def little_bmo(b, w):
    L1, L2 = axes_of(b.grid)
    B, W = to_lattice(b), to_lattice(w.function())
    best = 0.0
    for m1, m2 in rectangles(L1, L2):
        box = B[np.ix_(m1, m2)]
        best = max(best, np.abs(box - box.mean()).sum() / W[np.ix_(m1, m2)].sum())
    return best


def _energies(b, w):
    """[(rectangle masks, sum_e |b^(R^e)|^2 / <w>_R)] over Haar rectangles."""
    L1, L2 = axes_of(b.grid)
    B, W = to_lattice(b), to_lattice(w.function())
    out = []
    for k1, q1 in [(k, q) for k in range(L1.K) for q in L1.cubes(k)]:
        for k2, q2 in [(k, q) for k in range(L2.K) for q in L2.cubes(k)]:
            m1, m2 = L1.mask(k1, q1), L2.mask(k2, q2)
            e = sum(pair(B, L1.haar(k1, q1, e1), L2.haar(k2, q2, e2)) ** 2
                    for e1 in L1.signatures() for e2 in L2.signatures())
            out.append((m1, m2, e / W[np.ix_(m1, m2)].mean()))
    return out, W


def rectangular_bmo(b, w):
    E, W = _energies(b, w)
    best = 0.0
    for m1, m2, _ in E:
        tot = sum(e for n1, n2, e in E if np.all(m1[n1]) and np.all(m2[n2]))
        best = max(best, np.sqrt(tot / (W[np.ix_(m1, m2)].sum() / W.size)))
    return best


def product_bmo_on(b, w, mask):
    """(1/w(O) sum_{R in O} E_R)^{1/2} for a cell set O given in Morton layout."""
    E, W = _energies(b, w)
    O = to_lattice(GridFunction(b.grid, mask.astype(float))) > 0.5
    tot = sum(e for m1, m2, e in E if np.all(O[np.ix_(m1, m2)]))
    return float(np.sqrt(tot / (W[O].sum() / W.size)))


def product_bmo_exhaustive(b, w):
    """Supremum over every nonempty cell set; tiny grids only.

    Cell sets are bitmasks over lattice cells; a rectangle counts when all
    of its cells are in the set.
    """
    E, W = _energies(b, w)
    ncell = W.size
    subsets = np.arange(1, 2 ** ncell, dtype=np.int64)
    bit = (2 ** np.arange(ncell, dtype=np.int64)).reshape(W.shape)
    wO = np.zeros(subsets.size)
    for x, wx in zip(bit.ravel(), W.ravel()):
        wO += ((subsets & x) != 0) * wx / ncell
    tot = np.zeros(subsets.size)
    for m1, m2, e in E:
        r = int(bit[np.ix_(m1, m2)].sum())
        tot += ((subsets & r) == r) * e
    return float(np.sqrt(tot / wO).max())


def weighted_norm(f, w, p):
    F, W = to_lattice(f), to_lattice(w.function())
    return float((np.abs(F) ** p * W).mean() ** (1 / p))
