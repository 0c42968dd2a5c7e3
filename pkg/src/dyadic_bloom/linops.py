"""Linear operators on grid functions and their weighted operator norms."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, svds

from .core import GridFunction
from .weights import as_weight


class GridOperator:
    """Linear map on grid functions acting on raw (..., N1, N2) arrays.

    matvec and rmatvec (the unweighted L^2 adjoint) must accept leading
    batch axes.  Calling the operator on a GridFunction returns a GridFunction.
    """

    def __init__(self, grid, matvec, rmatvec=None, name="T"):
        self.grid = grid
        self.matvec = matvec
        self.rmatvec = rmatvec
        self.name = name

    def __call__(self, f):
        if isinstance(f, GridFunction):
            if f.grid != self.grid:
                raise ValueError("grid mismatch")
            return GridFunction(self.grid, self.matvec(f.values))
        return self.matvec(np.asarray(f, dtype=float))

    @property
    def T(self):
        if self.rmatvec is None:
            raise ValueError(f"operator {self.name} has no adjoint")
        return GridOperator(self.grid, self.rmatvec, self.matvec, f"{self.name}^*")

    def dense(self, chunk=512):
        """Matrix of the operator on flattened (Morton) cell values."""
        N1, N2 = self.grid.shape
        n = N1 * N2
        M = np.empty((n, n))
        for s in range(0, n, chunk):
            e = min(n, s + chunk)
            E = np.zeros((e - s, n))
            E[np.arange(e - s), np.arange(s, e)] = 1.0
            M[:, s:e] = self.matvec(E.reshape(e - s, N1, N2)).reshape(e - s, n).T
        return M

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __matmul__(self, other):
        return compose(self, other)

    def __rmul__(self, c):
        return scale(self, c)


def _adjoint_or_none(*ops):
    return all(op.rmatvec is not None for op in ops)


def add(A, B):
    rm = (lambda G: A.rmatvec(G) + B.rmatvec(G)) if _adjoint_or_none(A, B) else None
    return GridOperator(A.grid, lambda F: A.matvec(F) + B.matvec(F), rm, f"({A.name}+{B.name})")


def scale(A, c):
    rm = (lambda G: c * A.rmatvec(G)) if A.rmatvec is not None else None
    return GridOperator(A.grid, lambda F: c * A.matvec(F), rm, f"{c}*{A.name}")


def compose(A, B):
    """A after B."""
    rm = (lambda G: B.rmatvec(A.rmatvec(G))) if _adjoint_or_none(A, B) else None
    return GridOperator(A.grid, lambda F: A.matvec(B.matvec(F)), rm, f"{A.name}{B.name}")


def identity_operator(grid):
    return GridOperator(grid, lambda F: np.array(F, dtype=float), lambda G: np.array(G, dtype=float), "I")


def multiplication_operator(m):
    v = m.values
    return GridOperator(m.grid, lambda F: v * F, lambda G: v * G, "M")


def zero_operator(grid):
    return GridOperator(grid, lambda F: np.zeros_like(F), lambda G: np.zeros_like(G), "0")


# ---------------------------------------------------------------------------
# norm estimation

@dataclass
class NormEstimate:
    """Operator norm estimate; direction says whether it is exact or a lower bound."""

    value: float
    method: str
    direction: str = "exact"
    restarts: int = 1
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    restart_values: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


DENSE_LIMIT = 256
DENSE_MAX = 4096


def _conjugated(T, mu, lam, p):
    """u -> lam^{1/p} T(mu^{-1/p} u) and its adjoint."""
    a = lam.values ** (1.0 / p)
    c = mu.values ** (-1.0 / p)
    fwd = lambda U: a * T.matvec(c * U)
    adj = (lambda V: c * T.rmatvec(a * V)) if T.rmatvec is not None else None
    return fwd, adj


def _top_singular_lanczos(fwd, adj, shape, tol, seed):
    n = shape[0] * shape[1]
    op = LinearOperator((n, n), dtype=float,
                        matvec=lambda x: fwd(x.reshape(shape)).reshape(-1),
                        rmatvec=lambda y: adj(y.reshape(shape)).reshape(-1))
    v0 = np.random.default_rng(seed).standard_normal(n)
    try:
        _, s, vt = svds(op, k=1, tol=tol, v0=v0, maxiter=20 * n, solver="arpack")
        sigma, v = float(s[0]), vt[0]
    except (ArpackError, ArpackNoConvergence):
        # ARPACK cannot restart when the top singular value is highly
        # degenerate; plain power iteration converges fast exactly then
        sigma, v = _power_iteration(op, v0, tol)
    Av = op.matvec(v)
    res = float(np.linalg.norm(op.rmatvec(Av) - sigma ** 2 * v) / max(sigma ** 2, 1e-300))
    return sigma, v.reshape(shape), res


def _power_iteration(op, v, tol, max_iter=5000):
    v = v / np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = op.rmatvec(op.matvec(v))
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0, v
        v = w / new
        if abs(new - lam) <= tol * new:
            lam = new
            break
        lam = new
    return float(np.sqrt(lam)), v


def operator_norm(T, mu=None, lam=None, p=2.0, method="auto", restarts=8, seed=0,
                  max_iter=500, tol=1e-9):
    """||T : L^p(mu) -> L^p(lam)|| estimate.

    p = 2: largest singular value of u -> lam^{1/2} T(mu^{-1/2} u), either by
    a dense SVD ("dense-svd", state dimension <= 4096) or by Lanczos
    bidiagonalization on matrix-vector products ("lanczos").  Other p:
    projected normalized-gradient ascent of ||Tf||_{L^p(lam)} on the unit
    sphere of L^p(mu) with backtracking, several restarts; a lower bound.
    """
    grid = T.grid
    mu = as_weight(mu, grid)
    lam = as_weight(lam, grid)
    fwd, adj = _conjugated(T, mu, lam, p)
    n = grid.size
    if method == "auto":
        if p == 2:
            method = "dense-svd" if (n <= DENSE_LIMIT or adj is None) else "lanczos"
        else:
            method = "projected-ascent"
    if method == "dense-svd":
        if p != 2:
            raise ValueError("dense SVD only computes p = 2 norms")
        if n > DENSE_MAX:
            raise ValueError("state dimension too large for the dense route")
        M = GridOperator(grid, fwd).dense()
        s = np.linalg.svd(M, compute_uv=False)
        return NormEstimate(float(s[0]), "dense-svd")
    if method == "lanczos":
        if p != 2:
            raise ValueError("Lanczos only computes p = 2 norms")
        if adj is None:
            raise ValueError("Lanczos needs the adjoint operator")
        val, _, res = _top_singular_lanczos(fwd, adj, grid.shape, 1e-12, seed)
        return NormEstimate(val, "lanczos", residual=res, converged=res <= 1e-8)
    if method == "projected-ascent":
        if adj is None:
            raise ValueError("gradient ascent needs the adjoint operator")
        return _ascent(fwd, adj, grid, p, restarts, seed, max_iter, tol)
    raise ValueError(f"unknown method {method!r}")


def _pnorm(U, p):
    return np.sum(np.abs(U) ** p, axis=(-2, -1)) ** (1.0 / p)


def _ascent(fwd, adj, grid, p, restarts, seed, max_iter, tol):
    rng = np.random.default_rng(seed)
    restarts = max(int(restarts), 8)
    U = rng.standard_normal((restarts,) + grid.shape)
    # one start from the p = 2 singular vector of the same conjugated map
    try:
        _, v, _ = _top_singular_lanczos(fwd, adj, grid.shape, 1e-6, seed)
        U[0] = v
    except Exception:
        pass
    U /= _pnorm(U, p)[:, None, None]

    def ratio(U):
        return _pnorm(fwd(U), p) / _pnorm(U, p)

    def grad(U):
        AU = fwd(U)
        g = adj(np.abs(AU) ** (p - 1) * np.sign(AU))
        g = g / np.maximum(_pnorm(AU, p) ** p, 1e-300)[:, None, None]
        g -= np.abs(U) ** (p - 1) * np.sign(U) / np.maximum(_pnorm(U, p) ** p, 1e-300)[:, None, None]
        return g

    val = ratio(U)
    step = np.full(restarts, 0.5)
    active = np.ones(restarts, dtype=bool)
    it = 0
    for it in range(1, max_iter + 1):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        G = grad(U[idx])
        gn = np.sqrt(np.sum(G ** 2, axis=(-2, -1)))
        gn[gn == 0] = 1.0
        trial = U[idx] + step[idx, None, None] * G / gn[:, None, None]
        trial /= _pnorm(trial, p)[:, None, None]
        tv = ratio(trial)
        better = tv > val[idx]
        gain = np.where(better, (tv - val[idx]) / np.maximum(val[idx], 1e-300), 0.0)
        acc = idx[better]
        U[acc] = trial[better]
        val[acc] = tv[better]
        step[acc] = np.minimum(step[acc] * 2.0, 1.0)
        rej = idx[~better]
        step[rej] *= 0.5
        done = np.zeros(restarts, dtype=bool)
        done[acc[gain[better] < tol]] = True
        done[rej[step[rej] < 1e-12]] = True
        active &= ~done
    converged = not active.any()
    vals = [float(v) for v in val]
    running = list(np.maximum.accumulate(vals))
    return NormEstimate(float(max(vals)), "projected-ascent", "lower", restarts, it,
                        0.0, converged, running)
