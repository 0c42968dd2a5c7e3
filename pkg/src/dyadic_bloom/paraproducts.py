"""One- and biparameter paraproducts and the sixteen-term product decomposition.

Every term of the expansion of b*f in one parameter is of one of four
types, according to how the Haar series of b and f meet on a cube Q:

    A  b^(Q) <f>_Q h_Q                  (b finer than f)
    B  b^(Q^e) f^(Q^e) 1_Q/|Q|          (same cube, same signature)
    C  b^(Q^e) f^(Q^d) |Q|^{-1/2} h_Q^{e+d}   (same cube, e != d)
    D  <b>_Q f^(Q) h_Q                  (f finer than b)

A biparameter paraproduct is a pair of such types, one per parameter; the
fifteen paraproducts of b together with Pi_f b = (D, D) exhaust b*f for
fully cancellative b and f.
"""
from __future__ import annotations

from enum import Enum

import numpy as np

from .core import GridFunction, is_fully_cancellative
from .linops import GridOperator


class ParaproductKind(str, Enum):
    Pi = "Pi"
    PiStar = "PiStar"
    Gamma = "Gamma"
    Pi01 = "Pi01"
    Pi10 = "Pi10"
    Gamma01 = "Gamma01"
    GammaStar01 = "GammaStar01"
    Gamma10 = "Gamma10"
    GammaStar10 = "GammaStar10"
    pi01 = "pi01"
    piStar01 = "piStar01"
    pi10 = "pi10"
    piStar10 = "piStar10"
    gamma01 = "gamma01"
    gamma10 = "gamma10"


MODES = {
    "Pi": ("A", "A"), "PiStar": ("B", "B"), "Gamma": ("C", "C"),
    "Pi01": ("B", "A"), "Pi10": ("A", "B"),
    "Gamma01": ("C", "A"), "GammaStar01": ("C", "B"),
    "Gamma10": ("A", "C"), "GammaStar10": ("B", "C"),
    "pi01": ("A", "D"), "piStar01": ("B", "D"),
    "pi10": ("D", "A"), "piStar10": ("D", "B"),
    "gamma01": ("C", "D"), "gamma10": ("D", "C"),
    "PiF": ("D", "D"),
}

PRODUCT_KINDS = ("Pi", "PiStar", "Gamma", "Pi01", "Pi10", "Gamma01", "GammaStar01",
                 "Gamma10", "GammaStar10")
LITTLE_KINDS = ("pi01", "piStar01", "pi10", "piStar10", "gamma01", "gamma10")
DECOMPOSITION_TERMS = PRODUCT_KINDS + LITTLE_KINDS + ("PiF",)

_ADJ_MODE = {"A": "B", "B": "A", "C": "C", "D": "D"}
_BY_MODES = {v: k for k, v in MODES.items()}


def adjoint_kind(kind):
    """Tag of the L^2 adjoint of a paraproduct kind."""
    m1, m2 = MODES[_tag(kind)]
    return _BY_MODES[(_ADJ_MODE[m1], _ADJ_MODE[m2])]


def _tag(kind):
    tag = kind.value if isinstance(kind, Enum) else str(kind)
    if tag not in MODES:
        raise ValueError(f"unknown paraproduct kind {kind!r}")
    return tag


class Symbol:
    """Paraproduct symbol b with its Haar, hybrid and average coefficients.

    hh[r1, r2] = b^(Q1 x Q2), ha[r1, r2] = <b, h_{Q1} (x) 1_{Q2}/|Q2|>,
    ah the symmetric hybrid, aa[r1, r2] = <b>_{Q1 x Q2}, all indexed by the
    Haar indices of the two parameters (index 0 = whole domain).
    """

    def __init__(self, b):
        if not isinstance(b, GridFunction):
            raise TypeError("Symbol expects a GridFunction")
        self.b = b
        self.grid = b.grid
        a1, a2 = self.grid.axes
        B = b.values
        self.coeffs = {
            ("h", "h"): a1.analysis @ B @ a2.analysis.T,
            ("h", "a"): a1.analysis @ B @ a2.cube_average.T,
            ("a", "h"): a1.cube_average @ B @ a2.analysis.T,
            ("a", "a"): a1.cube_average @ B @ a2.cube_average.T,
        }
        for v in self.coeffs.values():
            v.flags.writeable = False

    @property
    def hh(self):
        return self.coeffs[("h", "h")]

    @property
    def ha(self):
        return self.coeffs[("h", "a")]

    @property
    def ah(self):
        return self.coeffs[("a", "h")]

    @property
    def aa(self):
        return self.coeffs[("a", "a")]


def as_symbol(b):
    return b if isinstance(b, Symbol) else Symbol(b)


def _analysis(axis, kind):
    return axis.analysis if kind == "h" else axis.cube_average


def apply_modes(grid, modes, bco, F):
    """Apply the paraproduct with per-parameter types `modes` to raw arrays F.

    bco maps ("h"|"a", "h"|"a") to the symbol's coefficient matrices;
    F may carry leading batch axes.
    """
    a1, a2 = grid.axes
    m1, m2 = modes
    tb = tuple("a" if m == "D" else "h" for m in modes)
    tf = tuple("a" if m == "A" else "h" for m in modes)
    Bm = bco[tb]
    Fm = _analysis(a1, tf[0]) @ F @ _analysis(a2, tf[1]).T
    if m1 == "C":
        _, rb1, rf1, _ = a1.gamma_triples
    if m2 == "C":
        _, rb2, rf2, _ = a2.gamma_triples
    if m1 == "C" and m2 == "C":
        X = Bm[np.ix_(rb1, rb2)] * Fm[..., rf1, :][..., rf2]
        O = a1.gamma_incidence @ X @ a2.gamma_incidence.T
    elif m1 == "C":
        O = a1.gamma_incidence @ (Bm[rb1, :] * Fm[..., rf1, :])
    elif m2 == "C":
        O = (Bm[:, rb2] * Fm[..., rf2]) @ a2.gamma_incidence.T
    else:
        O = Bm * Fm
    O = np.array(O)
    O[..., 0, :] = 0.0
    O[..., :, 0] = 0.0
    S1 = a1.cube_indicator if m1 == "B" else a1.synthesis
    S2 = a2.cube_indicator if m2 == "B" else a2.synthesis
    return S1.T @ O @ S2


def paraproduct_operator(kind, b):
    """GridOperator for the paraproduct `kind` with symbol b (adjoint included)."""
    sym = as_symbol(b)
    tag = _tag(kind)
    modes = MODES[tag]
    adj = MODES[adjoint_kind(tag)]
    return GridOperator(sym.grid,
                        lambda F: apply_modes(sym.grid, modes, sym.coeffs, F),
                        lambda G: apply_modes(sym.grid, adj, sym.coeffs, G),
                        tag)


def apply_paraproduct(kind, b, f):
    sym = as_symbol(b)
    if f.grid != sym.grid:
        raise ValueError("grid mismatch between symbol and function")
    return GridFunction(sym.grid, apply_modes(sym.grid, MODES[_tag(kind)], sym.coeffs, f.values))


def product_decomposition(b, f, tol=1e-10):
    """The fifteen paraproducts of b applied to f, plus Pi_f b under "PiF".

    For fully cancellative b and f the sixteen outputs sum to b*f.
    """
    sym = as_symbol(b)
    for name, g in (("b", sym.b), ("f", f)):
        if not is_fully_cancellative(g, tol):
            raise ValueError(f"{name} is not fully cancellative; project it first "
                             "with project_fully_cancellative")
    return {tag: GridFunction(sym.grid, apply_modes(sym.grid, MODES[tag], sym.coeffs, f.values))
            for tag in DECOMPOSITION_TERMS}


# ---------------------------------------------------------------------------
# one parameter

ONE_PARAMETER_MODES = {"Pi": "A", "PiStar": "B", "Gamma": "C", "PiF": "D"}


def apply_paraproduct_1d(kind, axis, b, f):
    """Pi_b f, Pi*_b f, Gamma_b f or Pi_f b for one-parameter arrays (last axis)."""
    mode = ONE_PARAMETER_MODES[kind]
    bh = axis.forward(b)
    ba = np.asarray(b) @ axis.cube_average.T
    Bm = ba if mode == "D" else bh
    Fm = np.asarray(f) @ (axis.cube_average if mode == "A" else axis.analysis).T
    if mode == "C":
        _, rb, rf, _ = axis.gamma_triples
        O = (Bm[..., rb] * Fm[..., rf]) @ axis.gamma_incidence.T
    else:
        O = Bm * Fm
    O = np.array(O)
    O[..., 0] = 0.0
    S = axis.cube_indicator if mode == "B" else axis.synthesis
    return O @ S


# ---------------------------------------------------------------------------
# two-weight norm ratios

def paraproduct_norm_ratio(kind, b, triple, trials=8, seed=0):
    """||P_b : L^p(mu) -> L^p(lam)|| divided by the matching norm of b in nu.

    Product-BMO kinds divide by the product BMO_D(nu) search value, the
    little-bmo kinds by bmo_D(nu).
    """
    from .bmo import bmo_little_norm, bmo_product_norm
    from .linops import operator_norm

    tag = _tag(kind)
    sym = as_symbol(b)
    nu = triple.nu
    if tag in LITTLE_KINDS:
        nb = bmo_little_norm(sym.b, nu)
    else:
        nb = bmo_product_norm(sym.b, nu)[0]
    if nb == 0:
        raise ZeroDivisionError("symbol has zero norm")
    est = operator_norm(paraproduct_operator(tag, sym), triple.mu, triple.lam, triple.p,
                        restarts=trials, seed=seed)
    return {"kind": tag, "norm": est.value, "symbol_norm": nb, "ratio": est.value / nb,
            "method": est.method, "direction": est.direction}
