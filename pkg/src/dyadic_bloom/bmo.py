"""Weighted little bmo, product and rectangular BMO, John-Nirenberg variants, H^1."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import GridFunction, block_means
from .maxsquare import square_function
from .weights import as_weight, conjugate_weight, dual_exponent, weighted_lp_norm


def _blocks(grid, V, k1, k2):
    a1, a2 = grid.axes
    c1, c2 = a1.cubes_at(k1), a2.cubes_at(k2)
    return V.reshape(c1, a1.N // c1, c2, a2.N // c2)


def oscillation_norm(b, sigma=None, rho=None, q=1.0, pairs=None):
    """sup_R ( (1/sigma(R)) int_R |b - <b>_R|^q d rho )^{1/q}.

    sigma, rho are Weights (None = Lebesgue).  pairs restricts the level
    pairs (k1, k2) searched; the default is every dyadic rectangle.
    """
    grid = b.grid
    v = b.values
    sv = None if sigma is None else sigma.averages(1.0)
    rv = None if rho is None else rho.values
    K1, K2 = grid.depths
    if pairs is None:
        pairs = [(k1, k2) for k1 in range(K1 + 1) for k2 in range(K2 + 1)]
    best = 0.0
    for k1, k2 in pairs:
        V = _blocks(grid, v, k1, k2)
        dev = np.abs(V - V.mean(axis=(1, 3), keepdims=True)) ** q
        if rv is not None:
            dev = dev * _blocks(grid, rv, k1, k2)
        num = dev.mean(axis=(1, 3))
        den = 1.0 if sv is None else sv[k1][k2]
        best = max(best, float(np.max(num / den)))
    return best ** (1.0 / q)


def bmo_little_norm(b, w=None):
    """max_R (1/w(R)) int_R |b - <b>_R| over every dyadic rectangle."""
    return oscillation_norm(b, sigma=w, q=1.0)


def bmo_slice_norms(b, w=None):
    """Uniform one-parameter weighted BMO norms of the slices.

    Returns (s1, s2): s1 = sup_{x2} ||b(., x2)||_{BMO(w(., x2))} and s2 the
    symmetric quantity.  They are the little bmo supremum restricted to
    rectangles that are a single cell in the other parameter.
    """
    K1, K2 = b.grid.depths
    s1 = oscillation_norm(b, sigma=w, pairs=[(k1, K2) for k1 in range(K1 + 1)])
    s2 = oscillation_norm(b, sigma=w, pairs=[(K1, k2) for k2 in range(K2 + 1)])
    return s1, s2


def john_nirenberg_variants(b, mu, lam, p):
    """(bmo(nu), bmo(mu, lam, p), bmo(lam', mu', p')) with nu the Bloom weight."""
    from .weights import BloomTriple

    pd = dual_exponent(p)
    nu = BloomTriple(mu, lam, p).nu
    v1 = bmo_little_norm(b, nu)
    v2 = oscillation_norm(b, sigma=mu, rho=lam, q=p)
    v3 = oscillation_norm(b, sigma=conjugate_weight(lam, p), rho=conjugate_weight(mu, p), q=pd)
    return v1, v2, v3


def bmo_lq_norm(b, w, q):
    """sup_R ((1/w(R)) int_R |b - <b>_R|^q dw')^{1/q}, w' = w^{1-q}."""
    return oscillation_norm(b, sigma=w, rho=conjugate_weight(w, q / (q - 1)), q=q)


# ---------------------------------------------------------------------------
# coefficient (Carleson) norms

def _energy(b, w):
    """E[k1][k2]: sum over signatures of |b^(R)|^2 / <w>_R per rectangle."""
    grid = b.grid
    a1, a2 = grid.axes
    C = a1.analysis @ b.values @ a2.analysis.T
    A = w.averages(1.0)
    E = []
    for l1 in range(a1.K):
        row = []
        for l2 in range(a2.K):
            blk = C[2 ** (l1 * a1.n):2 ** ((l1 + 1) * a1.n), 2 ** (l2 * a2.n):2 ** ((l2 + 1) * a2.n)]
            blk = blk.reshape(a1.cubes_at(l1), a1.nsig, a2.cubes_at(l2), a2.nsig)
            row.append((blk ** 2).sum(axis=(1, 3)) / A[l1][l2])
        E.append(row)
    return E


def _sum_to(E, grid, l1, l2):
    """Block sums of E[k1][k2] (k >= l) to rectangles of levels (l1, l2)."""
    a1, a2 = grid.axes
    c1, c2 = a1.cubes_at(l1), a2.cubes_at(l2)
    tot = np.zeros((c1, c2))
    for k1 in range(l1, a1.K):
        for k2 in range(l2, a2.K):
            e = E[k1][k2]
            tot += e.reshape(c1, e.shape[0] // c1, c2, e.shape[1] // c2).sum(axis=(1, 3))
    return tot


def _rectangle_table(b, w):
    """value[(l1, l2)] = (1/w(R) sum_{T in R} |b^(T)|^2/<w>_T)^{1/2} per rectangle."""
    grid = b.grid
    a1, a2 = grid.axes
    E = _energy(b, w)
    A = w.averages(1.0)
    out = {}
    for l1 in range(a1.K):
        for l2 in range(a2.K):
            wR = A[l1][l2] * a1.cube_measure(l1) * a2.cube_measure(l2)
            out[(l1, l2)] = np.sqrt(_sum_to(E, grid, l1, l2) / wR)
    return E, out


def bmo_rectangular_norm(b, w=None):
    w = as_weight(w, b.grid)
    _, table = _rectangle_table(b, w)
    return float(max(v.max() for v in table.values()))


@dataclass
class OpenSetApprox:
    """Union of grid cells standing in for an open set, with search metadata."""

    mask: np.ndarray = field(repr=False)
    value: float = 0.0
    method: str = ""
    iterations: int = 0
    seed: int = 0

    def __post_init__(self):
        if not np.any(self.mask):
            raise ValueError("open set approximation must have positive measure")

    def measure(self):
        return float(self.mask.mean())

    def rectangles(self, grid):
        """Haar rectangles (level pair, cube indices) contained in the shadow."""
        inside = block_means(grid, self.mask.astype(float))
        out = []
        for l1 in range(grid.depths[0]):
            for l2 in range(grid.depths[1]):
                for c1, c2 in zip(*np.nonzero(inside[l1][l2] == 1.0)):
                    out.append((l1, int(c1), l2, int(c2)))
        return out

    def to_dict(self, grid):
        bitmap = GridFunction(grid, self.mask.astype(float)).spatial().reshape(grid.shape)
        return {"value": self.value, "method": self.method, "iterations": self.iterations,
                "seed": self.seed, "bitmap": ["".join("1" if v else "0" for v in row)
                                               for row in bitmap.astype(bool)]}


def _objective(E, w, grid, mask):
    """(1/w(O) sum_{R in O} E_R)^{1/2} for a boolean cell mask O."""
    wo = w.measure(mask)
    if wo <= 0:
        return 0.0
    inside = block_means(grid, mask.astype(float))
    a1, a2 = grid.axes
    tot = 0.0
    for l1 in range(a1.K):
        for l2 in range(a2.K):
            tot += float(E[l1][l2][inside[l1][l2] == 1.0].sum())
    return float(np.sqrt(tot / wo))


def _rect_mask(grid, l1, c1, l2, c2):
    a1, a2 = grid.axes
    m = np.zeros(grid.shape, dtype=bool)
    m[a1.cube_cells(l1, c1), a2.cube_cells(l2, c2)] = True
    return m


def _exhaustive(E, w, grid):
    """Every nonempty cell subset; only for grids with at most 16 cells."""
    a1, a2 = grid.axes
    ncell = grid.size
    rects, weights_ = [], []
    for l1 in range(a1.K):
        for l2 in range(a2.K):
            for c1 in range(a1.cubes_at(l1)):
                for c2 in range(a2.cubes_at(l2)):
                    m = _rect_mask(grid, l1, c1, l2, c2).reshape(-1)
                    rects.append(sum(1 << int(x) for x in np.nonzero(m)[0]))
                    weights_.append(E[l1][l2][c1, c2])
    rects = np.array(rects, dtype=np.int64)
    weights_ = np.array(weights_)
    subsets = np.arange(1, 2 ** ncell, dtype=np.int64)
    cellw = w.values.reshape(-1) / ncell
    wo = np.zeros(subsets.size)
    for x in range(ncell):
        wo += ((subsets >> x) & 1) * cellw[x]
    tot = np.zeros(subsets.size)
    for r, e in zip(rects, weights_):
        tot += ((subsets & r) == r) * e
    vals = np.sqrt(tot / wo)
    best = int(np.argmax(vals))
    bits = subsets[best]
    mask = np.array([(bits >> x) & 1 for x in range(ncell)], dtype=bool).reshape(grid.shape)
    return float(vals[best]), mask, subsets.size


def bmo_product_norm(b, w=None, budget=48, seed=0):
    """Lower bound for the weighted product BMO norm, with a witness set.

    Searches single rectangles, unions of two among the `budget` best
    single rectangles, and a greedy union that keeps adding rectangles
    from that candidate pool (level-K cells included) while the objective
    increases.  Grids with at most 16 cells are searched exhaustively.
    Returns (value, OpenSetApprox).
    """
    grid = b.grid
    w = as_weight(w, grid)
    E, table = _rectangle_table(b, w)
    if grid.size <= 16:
        val, mask, its = _exhaustive(E, w, grid)
        if val == 0.0:
            mask = np.ones(grid.shape, dtype=bool)
        return val, OpenSetApprox(mask, val, "exhaustive", its, seed)
    singles = []
    for (l1, l2), v in table.items():
        for c1, c2 in zip(*np.unravel_index(np.argsort(-v, axis=None)[:budget], v.shape)):
            singles.append((float(v[c1, c2]), (l1, int(c1), l2, int(c2))))
    singles.sort(key=lambda t: -t[0])
    pool = [r for _, r in singles[:budget]]
    best_val, best_mask = singles[0][0], _rect_mask(grid, *singles[0][1])
    its = len(singles)
    masks = [_rect_mask(grid, *r) for r in pool]
    for a, b_ in itertools.combinations(range(len(pool)), 2):
        m = masks[a] | masks[b_]
        v = _objective(E, w, grid, m)
        its += 1
        if v > best_val:
            best_val, best_mask = v, m
    # greedy growth from the best few seeds
    for seed_mask in [best_mask] + masks[:3]:
        cur, cur_val = seed_mask.copy(), _objective(E, w, grid, seed_mask)
        for _ in range(budget):
            step_val, step_mask = cur_val, None
            for m in masks:
                if np.all(cur[m]):
                    continue
                cand = cur | m
                v = _objective(E, w, grid, cand)
                its += 1
                if v > step_val:
                    step_val, step_mask = v, cand
            if step_mask is None:
                break
            cur, cur_val = step_mask, step_val
        if cur_val > best_val:
            best_val, best_mask = cur_val, cur
    return best_val, OpenSetApprox(best_mask, best_val, "search", its, seed)


def bmo_one_parameter_norm(axis, u):
    """Dyadic L^2-coefficient BMO: sup_Q (1/|Q| sum_{P in Q} |u^(P)|^2)^{1/2}."""
    c2 = np.asarray(axis.forward(u)) ** 2
    c2 = c2[..., 1:]
    lev, cube = axis.haar_level[1:], axis.haar_cube[1:]
    best = np.zeros(c2.shape[:-1])
    for l in range(axis.K):
        sel = lev >= l
        owner = cube[sel] >> ((lev[sel] - l) * axis.n)
        inc = np.zeros((owner.size, axis.cubes_at(l)))
        inc[np.arange(owner.size), owner] = 1.0
        sums = c2[..., sel] @ inc
        best = np.maximum(best, np.sqrt(sums.max(axis=-1) / axis.cube_measure(l)))
    return best if best.ndim else float(best)


# ---------------------------------------------------------------------------
# H^1 and duality

def h1_norm(phi, w=None, scope="biparameter"):
    """||S phi||_{L^1(w)} for S_D (biparameter) or S_{D_t} (scope 1 or 2)."""
    return weighted_lp_norm(square_function(phi, scope), w, 1.0)


def duality_ratio(b, phi, w=None, scope="product"):
    """|<b, phi>| / (||b|| ||S phi||_{L^1(w)}).

    scope "product" pairs product BMO_D(w) (search lower bound) with S_D;
    scope 1 or 2 pairs little bmo(w) with S_{D_t}.
    """
    grid = b.grid
    w = as_weight(w, grid)
    pairing = abs(b.inner(phi))
    if scope == "product":
        nb = bmo_product_norm(b, w)[0]
        nphi = h1_norm(phi, w, "biparameter")
    elif scope in (1, 2):
        nb = bmo_little_norm(b, w)
        nphi = h1_norm(phi, w, scope)
    else:
        raise ValueError(f"unknown duality scope {scope!r}")
    if nb == 0 or nphi == 0:
        if pairing == 0:
            return 0.0
        raise ZeroDivisionError("degenerate norm with nonzero pairing")
    return pairing / (nb * nphi)
