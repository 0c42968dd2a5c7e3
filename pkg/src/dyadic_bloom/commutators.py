"""Commutators [b, T], their exact remainder identities and two-weight norm ratios."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import GridFunction, is_fully_cancellative
from .linops import GridOperator, NormEstimate, operator_norm  # noqa: F401  (re-export)
from .paraproducts import (LITTLE_KINDS, MODES, PRODUCT_KINDS, Symbol, apply_modes,
                           paraproduct_operator)
from .shifts import CancellativeShift, ProductBmoSymbol, _mixed_kind, _scatter2


def _operator(T):
    if isinstance(T, GridOperator):
        return T
    if hasattr(T, "operator"):
        return T.operator()
    raise TypeError(f"cannot use {type(T).__name__} as an operator")


def commutator_apply(b, T, f):
    """[b, T] f = b T(f) - T(b f) with exact pointwise products."""
    op = _operator(T)
    if b.grid != f.grid or op.grid != f.grid:
        raise ValueError("grid mismatch")
    return GridFunction(f.grid, b.values * op.matvec(f.values) - op.matvec(b.values * f.values))


def commutator_operator(b, T):
    """[b, T] as a GridOperator; its adjoint is T*(b g) - b T*(g)."""
    op = _operator(T)
    if b.grid != op.grid:
        raise ValueError("grid mismatch")
    v = b.values
    fwd = lambda F: v * op.matvec(F) - op.matvec(v * F)
    adj = (lambda G: op.rmatvec(v * G) - v * op.rmatvec(G)) if op.rmatvec is not None else None
    return GridOperator(op.grid, fwd, adj, f"[b,{op.name}]")


# ---------------------------------------------------------------------------
# remainder reports

@dataclass
class RemainderReport:
    """Terms of a remainder identity and how well its sides agree."""

    name: str
    operand_norms: dict
    terms: dict = field(repr=False)
    residuals: dict = field(default_factory=dict)

    @property
    def residual(self):
        return max(self.residuals.values(), default=0.0)

    @property
    def scale(self):
        s = 1.0
        for v in self.operand_norms.values():
            s *= max(v, 1e-300)
        return s

    def holds(self, tol=1e-10):
        return self.residual <= tol * max(1.0, self.scale)

    def to_dict(self):
        return {"name": self.name, "operand_norms": self.operand_norms,
                "term_norms": {k: float(np.abs(v.values).max()) for k, v in self.terms.items()},
                "residuals": self.residuals, "residual": self.residual}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _maxdiff(u, v):
    return float(np.abs(u.values - v.values).max())


def _require_cancellative(**kw):
    for name, g in kw.items():
        if not is_fully_cancellative(g, 1e-10):
            raise ValueError(f"{name} must be fully cancellative")


def _sup(g):
    return float(np.abs(g.values).max())


def _pi_f_b(g, b):
    """Pi_g b = sum <b>_R g^(R) h_R."""
    return GridFunction(b.grid, apply_modes(b.grid, ("A", "A"), Symbol(g).coeffs, b.values))


# ---------------------------------------------------------------------------
# cancellative shifts

def _ancestor_haar(axis, idx, k):
    """W[e, r] = h_r(cube(idx[e])) for r among the Haar functions of the k-th ancestor."""
    lev = axis.haar_level[idx]
    cube = axis.haar_cube[idx]
    la = lev - k
    ca = cube >> (k * axis.n)
    cell = cube << ((axis.K - lev) * axis.n)
    W = np.zeros((idx.size, axis.N))
    rows = np.arange(idx.size)
    for sig in range(axis.nsig):
        r = 2 ** (la * axis.n) + ca * axis.nsig + sig
        W[rows, r] = axis.synthesis[r, cell]
    return W


def _root_cube_id(axis, ents):
    return np.array([axis.cube_offset(l) for l in ents.root_level], dtype=np.int64) + ents.root


def _avg_split_terms(grid, b, ents, idx, depth, sign, tag):
    """Factors of <b>_{X1 x X2} - <b>_{R1 x R2} over the ancestors of X up to R."""
    a1, a2 = grid.axes
    B = b.values
    Bhh = a1.analysis @ B @ a2.analysis.T
    Bhc = a1.analysis @ B @ (a2.cube_indicators / a2.N).T
    Bch = (a1.cube_indicators / a1.N) @ B @ a2.analysis.T
    rc1 = _root_cube_id(a1, ents[0])
    rc2 = _root_cube_id(a2, ents[1])
    W1 = {k: _ancestor_haar(a1, idx[0], k) for k in range(1, depth[0] + 1)}
    W2 = {k: _ancestor_haar(a2, idx[1], k) for k in range(1, depth[1] + 1)}
    out = {}
    for k1, w1 in W1.items():
        for k2, w2 in W2.items():
            out[f"{tag}A[{k1},{k2}]"] = sign * (w1 @ Bhh @ w2.T)
    for k1, w1 in W1.items():
        out[f"{tag}B01[{k1}]"] = sign * (w1 @ Bhc)[:, rc2]
    for k2, w2 in W2.items():
        out[f"{tag}B10[{k2}]"] = sign * (Bch @ w2.T)[rc1, :]
    return out


def remainder_cancellative(b, s, f):
    """R f = Pi_{S f} b - S Pi_f b computed three ways.

    definition: the two paraproducts;
    closed form: sum a f^(P) (<b>_Q - <b>_P) h_Q;
    split: <b>_Q - <b>_R expanded over the ancestors of Q (terms "1A", "1B01",
    "1B10") plus <b>_R - <b>_P over the ancestors of P (terms "2...").
    """
    if not isinstance(s, CancellativeShift):
        raise TypeError("remainder_cancellative expects a CancellativeShift")
    _require_cancellative(b=b, f=f)
    grid = f.grid
    a1, a2 = grid.axes
    op = s.operator()
    definition = _pi_f_b(op(f), b) - op(_pi_f_b(f, b))

    e1, e2 = s.entries
    Fh = a1.analysis @ f.values @ a2.analysis.T
    base = Fh[np.ix_(e1.p, e2.p)] * s.coeffs
    Q1, Q2 = s._Q

    def synth(factor):
        return GridFunction(grid, a1.synthesis.T @ _scatter2(Q1, Q2, base * factor) @ a2.synthesis)

    Avg = a1.cube_average @ b.values @ a2.cube_average.T
    closed = synth(Avg[np.ix_(e1.q, e2.q)] - Avg[np.ix_(e1.p, e2.p)])

    factors = _avg_split_terms(grid, b, (e1, e2), (e1.q, e2.q), (s.complexity.j[0], s.complexity.j[1]), 1.0, "1")
    factors.update(_avg_split_terms(grid, b, (e1, e2), (e1.p, e2.p), (s.complexity.i[0], s.complexity.i[1]), -1.0, "2"))
    terms = {k: synth(v) for k, v in factors.items()}
    split = GridFunction.zeros(grid)
    for t in terms.values():
        split = split + t
    terms.update({"definition": definition, "closed": closed, "split": split})
    residuals = {"definition-closed": _maxdiff(definition, closed),
                 "definition-split": _maxdiff(definition, split),
                 "closed-split": _maxdiff(closed, split)}
    norms = {"b": _sup(b), "f": _sup(f), "a": float(np.abs(s.coeffs).max(initial=0.0))}
    return RemainderReport("cancellative", norms, terms, residuals)


# ---------------------------------------------------------------------------
# full standard paraproduct

def _strict(axis):
    """strict[r, s]: cube(s) is a proper subcube of cube(r)."""
    lev = axis.haar_level
    return axis.contains & (lev[None, :] > lev[:, None])


def lambda_terms(a, b, f):
    """Lambda_{a,b} f, lambda^{(0,1)}_{a,b} f and lambda^{(1,0)}_{a,b} f."""
    grid = f.grid
    a1, a2 = grid.axes
    A = Symbol(a).hh
    B = b.values
    F = f.values
    m1, m2 = a1.haar_measure, a2.haar_measure
    C1, C2 = a1.contains.astype(float), a2.contains.astype(float)

    def out(inner):
        O = A * inner / np.outer(m1, m2)
        O[0, :] = 0.0
        O[:, 0] = 0.0
        return GridFunction(grid, a1.synthesis.T @ O @ a2.synthesis)

    Z = (a1.analysis @ B @ a2.analysis.T) * (a1.analysis @ F @ a2.analysis.T)
    Lam = out(C1 @ Z @ C2.T)
    # <b, h_{P1} (x) 1_{Q2}/|Q2|> <f, h_{P1} (x) 1_{Q2}>
    Z01 = (a1.analysis @ B @ a2.cube_average.T) * (a1.analysis @ F @ a2.cube_average.T) * m2[None, :]
    lam01 = out(C1 @ Z01)
    Z10 = (a1.cube_average @ B @ a2.analysis.T) * (a1.cube_average @ F @ a2.analysis.T) * m1[:, None]
    lam10 = out(Z10 @ C2.T)
    return Lam, lam01, lam10


def remainder_full_standard(b, a, f):
    """[b, Pi_a] f = sum P_b Pi_a f + sum p_b Pi_a f - (Lambda + lambda01 + lambda10) f."""
    a = a.function if isinstance(a, ProductBmoSymbol) else a
    _require_cancellative(b=b, f=f, a=a)
    grid = f.grid
    Pi = paraproduct_operator("Pi", a)
    lhs = commutator_apply(b, Pi, f)
    g = Pi(f)
    sym = Symbol(b)
    terms = {}
    for kind in PRODUCT_KINDS + LITTLE_KINDS:
        terms[f"{kind}(Pi_a f)"] = GridFunction(grid, apply_modes(grid, MODES[kind], sym.coeffs, g.values))
    Lam, lam01, lam10 = lambda_terms(a, b, f)
    terms.update({"Lambda": Lam, "lambda01": lam01, "lambda10": lam10})
    rhs = GridFunction.zeros(grid)
    for k, t in terms.items():
        rhs = rhs - t if k in ("Lambda", "lambda01", "lambda10") else rhs + t
    terms.update({"commutator": lhs, "assembled": rhs})
    norms = {"a": _sup(a), "b": _sup(b), "f": _sup(f)}
    return RemainderReport("full-standard", norms, terms, {"commutator-assembled": _maxdiff(lhs, rhs)})


# ---------------------------------------------------------------------------
# full mixed paraproducts

def t_terms(a, b, f):
    """T^{(0,1)}_{a,b} f and T^{(1,0)}_{a,b} f for the (0,1) mixed paraproduct."""
    grid = f.grid
    a1, a2 = grid.axes
    A = Symbol(a).hh
    B, F = b.values, f.values
    # T01: sum_{Q1, P2} <b, h_{Q1} (x) 1_{P2}/|P2|> h_{Q1} (x) h_{P2} |Q1|^{-1}
    #      sum_{P1 strictly in Q1} a^(P1 x P2) <f, h_{P1} (x) 1_{P2}/|P2|>
    Bha = a1.analysis @ B @ a2.cube_average.T
    Fha = a1.analysis @ F @ a2.cube_average.T
    O = Bha * (_strict(a1).astype(float) @ (A * Fha)) / a1.haar_measure[:, None]
    O[0, :] = 0.0
    O[:, 0] = 0.0
    T01 = GridFunction(grid, a1.synthesis.T @ O @ a2.synthesis)
    # T10: sum_P a^(P) 1_{P1}/|P1| (x) h_{P2}
    #      sum_{Q2 strictly above P2} <b, 1_{P1}/|P1| (x) h_{Q2}> f^(P1 x Q2) / |Q2|
    Bah = a1.cube_average @ B @ a2.analysis.T
    Fh = a1.analysis @ F @ a2.analysis.T
    inner = (Bah * Fh / a2.haar_measure[None, :]) @ _strict(a2).astype(float)
    O = A * inner
    O[0, :] = 0.0
    O[:, 0] = 0.0
    T10 = GridFunction(grid, a1.cube_indicator.T @ O @ a2.synthesis)
    return T01, T10


def _mixed_01(a, b, f):
    grid = f.grid
    Pm = paraproduct_operator("Pi01", a)
    sym = Symbol(b)

    def little(kind, g):
        return GridFunction(grid, apply_modes(grid, MODES[kind], sym.coeffs, g.values))

    remainder = _pi_f_b(Pm(f), b) - Pm(_pi_f_b(f, b))
    Pf = Pm(f)
    T01, T10 = t_terms(a, b, f)
    terms = {
        "Pi_a01 pi_b10 f": Pm(little("pi10", f)),
        "Pi_a01 gamma_b10 f": Pm(little("gamma10", f)),
        "piStar_b01 Pi_a01 f": little("piStar01", Pf),
        "gamma_b01 Pi_a01 f": little("gamma01", Pf),
        "T10": T10,
        "T01": T01,
    }
    signs = {"Pi_a01 pi_b10 f": 1, "Pi_a01 gamma_b10 f": 1, "piStar_b01 Pi_a01 f": -1,
             "gamma_b01 Pi_a01 f": -1, "T10": 1, "T01": -1}
    return remainder, terms, signs


_SWAP_NAMES = {"Pi_a01 pi_b10 f": "Pi_a10 pi_b01 f", "Pi_a01 gamma_b10 f": "Pi_a10 gamma_b01 f",
               "piStar_b01 Pi_a01 f": "piStar_b10 Pi_a10 f", "gamma_b01 Pi_a01 f": "gamma_b10 Pi_a10 f",
               "T10": "T01", "T01": "T10"}


def remainder_full_mixed(b, a, orientation, f):
    """R f = Pi_{Pi_{a;o} f} b - Pi_{a;o} Pi_f b against its six-term expansion.

    Orientation (1, 0) is computed on the transposed grid.
    """
    a = a.function if isinstance(a, ProductBmoSymbol) else a
    _require_cancellative(b=b, f=f, a=a)
    orientation = tuple(orientation)
    _mixed_kind(orientation)
    if orientation == (0, 1):
        remainder, terms, signs = _mixed_01(a, b, f)
    else:
        remainder, terms, signs = _mixed_01(a.transpose(), b.transpose(), f.transpose())
        remainder = remainder.transpose()
        terms = {_SWAP_NAMES[k]: v.transpose() for k, v in terms.items()}
        signs = {_SWAP_NAMES[k]: v for k, v in signs.items()}
    rhs = GridFunction.zeros(f.grid)
    for k, t in terms.items():
        rhs = rhs + signs[k] * t
    terms.update({"remainder": remainder, "assembled": rhs})
    norms = {"a": _sup(a), "b": _sup(b), "f": _sup(f)}
    return RemainderReport(f"full-mixed{orientation}", norms, terms,
                           {"remainder-assembled": _maxdiff(remainder, rhs)})


# ---------------------------------------------------------------------------
# norm ratios

def poly_factor(complexity):
    if complexity is None:
        return 1.0
    return float((1 + max(complexity.parameter(1))) * (1 + max(complexity.parameter(2))))


def upper_bound_ratio(b, T, triple, complexity=None, restarts=8, seed=0):
    """||[b, T] : L^p(mu) -> L^p(lam)|| / (poly factor x ||b||_{bmo(nu)}).

    Returns (ratio, NormEstimate, bmo norm).  A constant b gives ratio 0.
    """
    from .bmo import bmo_little_norm

    if complexity is None and isinstance(T, CancellativeShift):
        complexity = T.complexity
    if complexity is None and hasattr(T, "complexity") and not isinstance(T, GridOperator):
        complexity = T.complexity
    nb = bmo_little_norm(b, triple.nu)
    est = operator_norm(commutator_operator(b, T), triple.mu, triple.lam, triple.p,
                        restarts=restarts, seed=seed)
    if nb <= 1e-13 * max(1.0, _sup(b)):
        if est.value > 1e-10 * max(1.0, _sup(b)):
            raise ValueError("degenerate symbol: zero bmo norm but nonzero commutator")
        return 0.0, est, nb
    return est.value / (poly_factor(complexity) * nb), est, nb


def _hilbert_1d(u, axis):
    N = u.shape[axis]
    k = np.fft.fftfreq(N, 1.0 / N)
    m = -1j * np.sign(k)
    if N % 2 == 0:
        m[N // 2] = 0.0
    shape = [1] * u.ndim
    shape[axis] = N
    return np.real(np.fft.ifft(np.fft.fft(u, axis=axis) * m.reshape(shape), axis=axis))


def hilbert_tensor(f, which=(1, 2)):
    """Periodic discrete Hilbert transform in the selected parameters (n1 = n2 = 1)."""
    return GridFunction(f.grid, hilbert_operator(f.grid, which).matvec(f.values))


def hilbert_operator(grid, which=(1, 2)):
    if tuple(grid.axis_dims) != (1, 1):
        raise ValueError("the discrete Hilbert transform needs n1 = n2 = 1")
    which = tuple(sorted(set(which)))
    if not which or not set(which) <= {1, 2}:
        raise ValueError("which must select parameters 1 and/or 2")

    def fwd(F):
        out = np.asarray(F, dtype=float)
        for t in which:
            out = _hilbert_1d(out, -2 if t == 1 else -1)
        return out

    sign = (-1.0) ** len(which)
    return GridOperator(grid, fwd, lambda G: sign * fwd(G), "H" + "".join(map(str, which)))


def lower_bound_ratio(b, triple, restarts=8, seed=0):
    """||b||_{bmo(nu)} / ||[b, H1 H2] : L^p(mu) -> L^p(lam)||; returns (ratio, estimate, bmo)."""
    from .bmo import bmo_little_norm

    nb = bmo_little_norm(b, triple.nu)
    est = operator_norm(commutator_operator(b, hilbert_operator(b.grid)), triple.mu, triple.lam,
                        triple.p, restarts=restarts, seed=seed)
    if nb <= 1e-13 * max(1.0, _sup(b)):
        return 0.0, est, nb
    if est.value <= 1e-13:
        raise ValueError("degenerate commutator norm")
    return nb / est.value, est, nb
