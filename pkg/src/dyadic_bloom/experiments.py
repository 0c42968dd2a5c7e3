"""Configuration-driven experiment suites with reproducible tabular reports."""
from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .bmo import duality_ratio, john_nirenberg_variants
from .commutators import (lower_bound_ratio, remainder_cancellative, remainder_full_mixed,
                          remainder_full_standard, upper_bound_ratio)
from .core import (CubeId, DyadicGrid, GridFunction, Rectangle, average_difference_series,
                   haar_forward, haar_inverse, indicator, local_mean_oscillation_expansion,
                   project_fully_cancellative, random_function,
                   random_series, rectangle_average, rectangle_average_series, signature_sum)
from .linops import operator_norm
from .maxsquare import (ShiftComplexity, maximal_dyadic, mixed_square_maximal,
                        shifted_square_function, square_function)
from .paraproducts import DECOMPOSITION_TERMS, LITTLE_KINDS, PRODUCT_KINDS, product_decomposition
from .paraproducts import paraproduct_norm_ratio
from .shifts import (SHIFT_KINDS, EnsembleConfig, allowed_kinds, ensemble_operator, make_shift,
                     random_cancellative_shift, sample_shift_ensemble)
from .weights import (BloomTriple, WeightFamilyConfig, ap_characteristic, averaged_weight,
                      weighted_lp_norm)

SUITES = ("identities", "paraproduct-bounds", "square-sweeps", "duality", "jn-equivalence",
          "shift-one-weight", "upper-bound", "lower-bound", "journe-ensemble")
MIN_TRIALS = 2
OUT_ENV = "DYADIC_BLOOM_OUT"

DEFAULT_THRESHOLDS = {"tol": 1e-10, "factor": 3.0, "drift": 0.25, "bound": 10.0, "a_max": 8.0}
DEFAULT_WEIGHTS = {
    "w": {"kind": "cascade", "delta": 1.0, "decay": 0.7, "seed": 11},
    "mu": {"kind": "cascade", "delta": 0.6, "decay": 0.5},
    "lam": {"kind": "cascade", "delta": 0.6, "decay": 0.5},
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def derive_seed(*keys):
    """Deterministic 32-bit seed from integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# configuration

@dataclass
class ExperimentConfig:
    suite: str
    grid: dict = field(default_factory=lambda: {"n1": 1, "n2": 1, "K1": 3, "K2": 3})
    sweep: list = field(default_factory=list)
    p: list = field(default_factory=lambda: [2.0])
    weights: dict = field(default_factory=dict)
    symbol: dict = field(default_factory=lambda: {"kind": "series", "smoothness": 0.5})
    caps: dict = field(default_factory=lambda: {"total": 3, "cap": [1, 1]})
    kinds: list = field(default_factory=lambda: list(SHIFT_KINDS))
    checks: list = field(default_factory=list)
    trials: int = 10
    seed: int = 0
    thresholds: dict = field(default_factory=dict)
    out: str | None = None

    # fields that do not change numerical output
    _RUNTIME = ("out",)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        d = dict(d)
        d.pop("config_hash", None)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        if "suite" not in d:
            raise ConfigError("configuration needs a suite name")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration is not valid JSON: {exc}") from None
        return cls.from_dict(d)

    def to_dict(self):
        d = asdict(self)
        d["config_hash"] = self.config_hash
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @property
    def config_hash(self):
        d = {k: v for k, v in asdict(self).items() if k not in self._RUNTIME}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # -- derived values ------------------------------------------------------
    def threshold(self, name):
        return float(self.thresholds.get(name, DEFAULT_THRESHOLDS[name]))

    def weight_config(self, name):
        d = dict(DEFAULT_WEIGHTS[name])
        d.update(self.weights.get(name, {}))
        return WeightFamilyConfig.from_dict(d)

    def grids(self):
        g = self.grid
        dims = (int(g.get("n1", 1)), int(g.get("n2", 1)))
        if self.sweep:
            return [DyadicGrid((int(K), int(K)), dims) for K in self.sweep]
        return [DyadicGrid((int(g["K1"]), int(g["K2"])), dims)]

    def validate(self):
        if self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}; choose from {', '.join(SUITES)}")
        if not isinstance(self.trials, int) or self.trials < MIN_TRIALS:
            raise ConfigError(f"at least {MIN_TRIALS} trials are required")
        try:
            grids = self.grids()
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid grid: {exc}") from None
        for g in grids:
            if g.size > 4096:
                raise ConfigError(f"grid with {g.size} cells exceeds the 4096-cell limit")
        if not self.p or any(float(p) <= 1 for p in self.p):
            raise ConfigError("every p must exceed 1")
        for name in self.weights:
            if name not in DEFAULT_WEIGHTS:
                raise ConfigError(f"unknown weight slot {name!r}")
            try:
                wc = self.weight_config(name)
            except TypeError as exc:
                raise ConfigError(f"invalid weight config {name!r}: {exc}") from None
            if wc.kind not in ("cascade", "power", "constant"):
                raise ConfigError(f"unknown weight kind {wc.kind!r} in slot {name!r}")
        for k in self.thresholds:
            if k not in DEFAULT_THRESHOLDS:
                raise ConfigError(f"unknown threshold {k!r}")
        for k in self.kinds:
            if k not in SHIFT_KINDS:
                raise ConfigError(f"unknown shift kind {k!r}")
        if self.symbol.get("kind", "series") not in ("series", "constant"):
            raise ConfigError("symbol kind must be 'series' or 'constant'")
        cap = self.caps.get("cap", [1, 1])
        Kmin = min(min(g.depths) for g in grids)
        if len(cap) != 2 or max(cap) > Kmin - 1 or min(cap) < 0:
            raise ConfigError(f"complexity cap {cap} is not admissible on depth {Kmin}")
        if self.suite == "lower-bound" and any(g.axis_dims != (1, 1) for g in grids):
            raise ConfigError("the lower-bound suite needs n1 = n2 = 1")


# ---------------------------------------------------------------------------
# reports

@dataclass
class Assertion:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list
    assertions: list
    runtime: float = 0.0

    @property
    def passed(self):
        return all(a.passed for a in self.assertions)

    def columns(self):
        lead = ["suite", "config_hash", "seed", "trial", "K1", "K2"]
        rest = sorted({k for r in self.rows for k in r} - set(lead))
        return lead + rest

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.columns(), lineterminator="\n")
        writer.writeheader()
        for r in self.rows:
            writer.writerow({k: _fmt(r.get(k, "")) for k in self.columns()})
        return buf.getvalue()

    def summary(self):
        out = {}
        for col in self.columns():
            vals = [r[col] for r in self.rows if isinstance(r.get(col), float)]
            if vals and col not in ("seed",):
                arr = np.asarray(vals)
                out[col] = {"max": float(np.nanmax(arr)), "median": float(np.nanmedian(arr))}
        return out

    def to_dict(self, csv_name=None):
        return {
            "suite": self.config.suite,
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash,
            "version": package_version(),
            "runtime_s": self.runtime,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "rows": len(self.rows),
            "summary": self.summary(),
            "assertions": [asdict(a) for a in self.assertions],
            "passed": self.passed,
            "csv": csv_name,
        }

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        stem = f"{self.config.suite}-{self.config.config_hash}"
        csv_path = os.path.join(out_dir, stem + ".csv")
        json_path = os.path.join(out_dir, stem + ".json")
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(os.path.basename(csv_path)), fh, indent=2, sort_keys=True)
        return csv_path, json_path


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def package_version():
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "0.0.0"


# ---------------------------------------------------------------------------
# shared generators

def make_symbol(cfg, grid, seed, cancellative=True):
    sym = cfg.symbol
    if sym.get("kind", "series") == "constant":
        return GridFunction.constant(grid, float(sym.get("value", 1.0)))
    return random_series(grid, seed, float(sym.get("smoothness", 0.5)), cancellative)


def make_triple(cfg, grid, seed, p):
    mu = cfg.weight_config("mu").build(grid, derive_seed(seed, 1))
    lam = cfg.weight_config("lam").build(grid, derive_seed(seed, 2))
    return BloomTriple(mu, lam, float(p))


def _complexities(grid, total, cap=None):
    out = []
    for v in itertools.product(range(total + 1), repeat=4):
        if sum(v) > total:
            continue
        c = ShiftComplexity((v[0], v[1]), (v[2], v[3]))
        if cap is not None and (max(c.parameter(1)) > cap[0] or max(c.parameter(2)) > cap[1]):
            continue
        if c.admissible(grid):
            out.append(c)
    return out


def _random_complexity(grid, rng, total):
    cs = _complexities(grid, total)
    return cs[int(rng.integers(len(cs)))]


def _random_shift(cfg, grid, rng):
    """A random shift of a configured kind, complexity total <= caps.total and
    max(i_t, j_t) <= caps.cap[t]."""
    kind = cfg.kinds[int(rng.integers(len(cfg.kinds)))]
    total = int(cfg.caps.get("total", 3))
    cap = cfg.caps.get("cap", [1, 1])
    cs = [c for c in _complexities(grid, total, cap) if kind in allowed_kinds(c)]
    c = cs[int(rng.integers(len(cs)))]
    orientation = None
    if kind == "full-mixed":
        orientation = [(0, 1), (1, 0)][int(rng.integers(2))]
    if kind == "partial" and c.total == 0:
        orientation = int(rng.integers(1, 3))
    return make_shift(grid, kind, c, int(rng.integers(2 ** 31)), orientation=orientation)


def drift(values):
    """max / min - 1 of a positive series; 0 for a single value."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return 0.0
    if v.min() <= 0:
        return 0.0 if v.max() <= 0 else math.inf
    return float(v.max() / v.min() - 1.0)


def _group_max(rows, key, value, where=None):
    out = {}
    for r in rows:
        if where is not None and not where(r):
            continue
        k = key(r)
        out[k] = max(out.get(k, -math.inf), r[value])
    return out


def _drift_assertions(cfg, rows, value, by=lambda r: ()):
    """Ensemble maxima per K (grouped by `by`) must agree within the drift threshold."""
    if len({r["K1"] for r in rows}) < 2:
        return []
    tol = cfg.threshold("drift")
    maxima = _group_max(rows, lambda r: (by(r), r["K1"]), value)
    out = []
    for g in sorted({k[0] for k in maxima}, key=str):
        series = [maxima[k] for k in sorted(maxima) if k[0] == g]
        d = drift(series)
        label = "/".join(map(str, g)) if g else "all"
        out.append(Assertion(f"drift[{label}]", d <= tol,
                             f"maxima {[round(s, 6) for s in series]}, drift {d:.4f} <= {tol}"))
    return out


def _bound_assertion(cfg, rows, value, name="bounded"):
    vals = [r[value] for r in rows]
    m = max(vals, default=0.0)
    b = cfg.threshold("bound")
    ok = bool(vals) and all(np.isfinite(vals)) and m <= b
    return Assertion(name, ok, f"max {value} {m:.6g} <= {b}")


# ---------------------------------------------------------------------------
# suites: each returns rows for one task; checks turn all rows into assertions

def _tasks_default(cfg):
    return [{"trial": t} for t in range(cfg.trials)]


def _cube(axis, t, k, q):
    return CubeId(t, k, axis.morton_to_position(q, k))


def _resid(u, v):
    return float(np.abs(np.asarray(u) - np.asarray(v)).max())


def haar_algebra_residuals(grid, rng):
    """Reconstruction, Parseval, averaging formulas, three-term split, signature rule."""
    out = {}
    a1, a2 = grid.axes
    f = random_function(grid, rng)
    s = haar_forward(f)
    out["reconstruction"] = _resid(haar_inverse(s).values, f.values)
    out["parseval"] = abs(f.norm() ** 2 - float(np.sum(s.coeffs ** 2)))
    k1, k2 = int(rng.integers(a1.K + 1)), int(rng.integers(a2.K + 1))
    R = Rectangle(_cube(a1, 1, k1, int(rng.integers(a1.cubes_at(k1)))),
                  _cube(a2, 2, k2, int(rng.integers(a2.cubes_at(k2)))))
    out["rectangle-average"] = abs(rectangle_average(f, R) - rectangle_average_series(s, R))
    worst_avg, worst_diff = 0.0, 0.0
    for ax in (a1, a2):
        u = rng.standard_normal(ax.N)
        c = ax.forward(u)
        k = int(rng.integers(1, ax.K + 1))
        q = int(rng.integers(ax.cubes_at(k)))
        worst_avg = max(worst_avg, abs(ax.average(u, k, q) - float(ax.ancestor_values(k, q) @ c)))
        kr = int(rng.integers(0, k))
        qr = q >> ((k - kr) * ax.n)
        direct = ax.average(u, k, q) - ax.average(u, kr, qr)
        worst_diff = max(worst_diff, abs(direct - average_difference_series(ax, c, (k, q), (kr, qr))))
    out["one-parameter-average"] = worst_avg
    out["average-difference"] = worst_diff
    split = local_mean_oscillation_expansion(f, R).total()
    direct = indicator(grid, R).values * (f.values - rectangle_average(f, R))
    out["three-term-split"] = _resid(split.values, direct)
    worst = 0.0
    for ax in (a1, a2):
        k = int(rng.integers(ax.K))
        q = int(rng.integers(ax.cubes_at(k)))
        for e in range(ax.nsig):
            for d in range(ax.nsig):
                he = ax.synthesis[ax.haar_index(k, q, e)]
                hd = ax.synthesis[ax.haar_index(k, q, d)]
                if e == d:
                    rhs = ax.cube_indicator[ax.haar_index(k, q, e)]
                else:
                    rhs = ax.cube_measure(k) ** -0.5 * ax.synthesis[ax.haar_index(k, q, signature_sum(e, d, ax.n))]
                worst = max(worst, _resid(he * hd, rhs))
    out["signature-product"] = worst
    return out


def decomposition_residual(grid, rng):
    b = random_function(grid, rng, cancellative=True)
    f = random_function(grid, rng, cancellative=True)
    terms = product_decomposition(b, f)
    total = sum((terms[k].values for k in DECOMPOSITION_TERMS), np.zeros(grid.shape))
    return _resid(total, b.values * f.values)


def remainder_residuals(grid, rng, total=3):
    out = {}
    fc = lambda: random_function(grid, rng, cancellative=True)
    c = _random_complexity(grid, rng, total)
    s = random_cancellative_shift(grid, c, int(rng.integers(2 ** 31)))
    out["remainder-cancellative"] = remainder_cancellative(fc(), s, fc()).residual
    a = fc()
    out["remainder-full-standard"] = remainder_full_standard(fc(), a, fc()).residual
    out["remainder-full-mixed(0,1)"] = remainder_full_mixed(fc(), a, (0, 1), fc()).residual
    out["remainder-full-mixed(1,0)"] = remainder_full_mixed(fc(), a, (1, 0), fc()).residual
    return out


def _identities(cfg, grid, task, seed):
    rng = np.random.default_rng(seed)
    checks = set(cfg.checks or ("haar", "decomposition", "remainders"))
    res = {}
    if "haar" in checks:
        res.update(haar_algebra_residuals(grid, rng))
    if "decomposition" in checks:
        res["decomposition-16"] = decomposition_residual(grid, rng)
    if "remainders" in checks:
        res.update(remainder_residuals(grid, rng, int(cfg.caps.get("total", 3))))
    return [{"check": k, "residual": float(v)} for k, v in sorted(res.items())]


def _identities_check(cfg, rows):
    tol = cfg.threshold("tol")
    worst = max((r["residual"] for r in rows), default=math.inf)
    by = _group_max(rows, lambda r: r["check"], "residual")
    out = [Assertion("max-residual", worst <= tol, f"max residual {worst:.3e} <= {tol}")]
    out += [Assertion(f"residual[{k}]", v <= tol, f"{v:.3e}") for k, v in sorted(by.items())]
    return out


def _paraproduct_bounds(cfg, grid, task, seed):
    rows = []
    b = make_symbol(cfg, grid, derive_seed(seed, 0))
    for p in cfg.p:
        triple = make_triple(cfg, grid, seed, p)
        for kind in PRODUCT_KINDS + LITTLE_KINDS:
            r = paraproduct_norm_ratio(kind, b, triple, seed=seed)
            rows.append({"p": float(p), "kind": kind, "ratio": float(r["ratio"]),
                         "norm": float(r["norm"]), "symbol_norm": float(r["symbol_norm"]),
                         "method": r["method"], "direction": r["direction"]})
    return rows


def _paraproduct_check(cfg, rows):
    return [_bound_assertion(cfg, rows, "ratio")] + _drift_assertions(
        cfg, rows, "ratio", lambda r: (r["kind"], r["p"]))


def _square_sweeps(cfg, grid, task, seed):
    rng = np.random.default_rng(seed)
    w = cfg.weight_config("w").build(grid, derive_seed(seed, 3))
    f = random_series(grid, derive_seed(seed, 0), 0.5, cancellative=False)
    c = _random_complexity(grid, rng, int(cfg.caps.get("total", 3)))
    (n1, n2) = grid.axis_dims
    growth = 2.0 ** ((n1 / 2) * (c.i[0] + c.j[0]) + (n2 / 2) * (c.i[1] + c.j[1]))
    i1, j1 = c.parameter(1)
    rows = []
    for p in cfg.p:
        nf = weighted_lp_norm(f, w, p)
        cancel = project_fully_cancellative(f)
        vals = {
            "S_D": weighted_lp_norm(square_function(f), w, p) / weighted_lp_norm(cancel, w, p),
            "S_D1": weighted_lp_norm(square_function(f, 1), w, p) / nf,
            "S_D2": weighted_lp_norm(square_function(f, 2), w, p) / nf,
            "M_S": weighted_lp_norm(maximal_dyadic(f), w, p) / nf,
            "S_shift": weighted_lp_norm(shifted_square_function(f, c), w, p) / (growth * nf),
            "SM": weighted_lp_norm(mixed_square_maximal(f, "SM"), w, p) / nf,
            "MS": weighted_lp_norm(mixed_square_maximal(f, "MS"), w, p) / nf,
            "SM_shift": weighted_lp_norm(mixed_square_maximal(f, "SM", (i1, j1)), w, p)
                        / (2.0 ** ((n1 / 2) * (i1 + j1)) * nf),
        }
        for name, v in vals.items():
            rows.append({"p": float(p), "quantity": name, "ratio": float(v),
                         "complexity": c.total, **c.to_dict()})
    return rows


_TWO_SIDED = ("S_D", "S_D1", "S_D2")


def _square_check(cfg, rows):
    b = cfg.threshold("bound")
    out = [_bound_assertion(cfg, rows, "ratio", "upper-bound")]
    lows = [r["ratio"] for r in rows if r["quantity"] in _TWO_SIDED]
    m = min(lows, default=0.0)
    out.append(Assertion("lower-bound", bool(lows) and m >= 1.0 / b,
                         f"min two-sided ratio {m:.6g} >= {1 / b:.4g}"))
    return out


def _duality(cfg, grid, task, seed):
    w = cfg.weight_config("w").build(grid, derive_seed(seed, 3))
    b = random_series(grid, derive_seed(seed, 0), 0.5)
    phi = random_series(grid, derive_seed(seed, 1), 0.5)
    rows = []
    for scope in ("product", 1, 2):
        rows.append({"quantity": f"duality[{scope}]", "ratio": float(duality_ratio(b, phi, w, scope))})
    # averaged weights stay in A_p (all cubes of both parameters), and [w]_{A_p} >= 1
    violations = 0
    worst_gap = -math.inf
    for p in cfg.p:
        bi = ap_characteristic(w, p)
        if bi < 1.0 - 1e-12:
            violations += 1
        for t, ax in ((1, grid.axes[0]), (2, grid.axes[1])):
            for k in range(ax.K + 1):
                for q in range(ax.cubes_at(k)):
                    ch = averaged_weight(w, _cube(ax, t, k, q)).characteristic(p)
                    worst_gap = max(worst_gap, ch - bi)
                    if ch > bi + 1e-9 or ch < 1.0 - 1e-12:
                        violations += 1
    rows.append({"quantity": "averaged-weight", "violations": float(violations),
                 "ratio": float(max(worst_gap, 0.0))})
    return rows


def _duality_check(cfg, rows):
    viol = sum(r.get("violations", 0.0) for r in rows)
    ratios = [r for r in rows if r["quantity"].startswith("duality")]
    return [_bound_assertion(cfg, ratios, "ratio"),
            Assertion("zero-violations", viol == 0, f"{int(viol)} violations")]


def _jn(cfg, grid, task, seed):
    rows = []
    b = make_symbol(cfg, grid, derive_seed(seed, 0))
    for p in cfg.p:
        t = make_triple(cfg, grid, seed, p)
        v1, v2, v3 = john_nirenberg_variants(b, t.mu, t.lam, float(p))
        rows.append({"p": float(p), "bmo_nu": v1, "bmo_mu_lam": v2, "bmo_dual": v3,
                     "ratio": v2 / v1 if v1 else 0.0, "ratio_dual": v3 / v1 if v1 else 0.0})
    return rows


def _jn_check(cfg, rows):
    b = cfg.threshold("bound")
    vals = [r[k] for r in rows for k in ("ratio", "ratio_dual")]
    lo, hi = min(vals, default=0.0), max(vals, default=math.inf)
    return [Assertion("equivalence", bool(vals) and 1.0 / b <= lo and hi <= b,
                      f"ratios in [{lo:.4g}, {hi:.4g}] within [{1 / b:.4g}, {b}]")]


def _shift_tasks(cfg):
    tasks = []
    total = int(cfg.caps.get("total", 3))
    g = cfg.grids()[0]
    for kind in cfg.kinds:
        for c in _complexities(g, total):
            if kind not in allowed_kinds(c):
                continue
            for s in range(cfg.trials):
                tasks.append({"kind": kind, "complexity": c, "sample": s,
                              "trial": len(tasks)})
    return tasks


def _shift_one_weight(cfg, grid, task, seed):
    kind, c, s = task["kind"], task["complexity"], task["sample"]
    w = cfg.weight_config("w").build(grid)
    orientation = None
    if kind == "full-mixed":
        orientation = [(0, 1), (1, 0)][s % 2]
    if kind == "partial" and c.total == 0:
        orientation = 1 + s % 2
    mode = "adversarial" if s % 2 else "uniform"
    rows = []
    d = make_shift(grid, kind, c, seed, mode=mode, orientation=orientation)
    for p in cfg.p:
        est = operator_norm(d.operator(), w, w, float(p), seed=seed)
        rows.append({"p": float(p), "kind": kind, "sample": s, "mode": mode,
                     "complexity": c.total, **c.to_dict(), "norm": float(est.value),
                     "method": est.method, "direction": est.direction,
                     "A2": float(ap_characteristic(w, 2.0))})
    return rows


def _shift_check(cfg, rows):
    out = []
    a = max((r["A2"] for r in rows), default=math.inf)
    out.append(Assertion("weight-A2", a <= cfg.threshold("a_max"),
                         f"[w]_A2 {a:.4f} <= {cfg.threshold('a_max')}"))
    fac = cfg.threshold("factor")
    cmax = _group_max(rows, lambda r: (r["K1"], r["p"], r["kind"],
                                       (r["i1"], r["i2"], r["j1"], r["j2"])), "norm")
    for K, p, kind in sorted({k[:3] for k in cmax}):
        base = cmax.get((K, p, kind, (0, 0, 0, 0)))
        if base is None:
            continue
        vals = [v for k, v in cmax.items() if k[:3] == (K, p, kind)]
        hi, lo = max(vals), min(vals)
        ok = hi <= fac * base and lo >= base / fac
        out.append(Assertion(f"uniform[K={K},p={p},{kind}]", ok,
                             f"complexity maxima in [{lo:.4f}, {hi:.4f}], baseline {base:.4f}, factor {fac}"))
    out += _drift_assertions(cfg, rows, "norm", lambda r: (r["kind"], r["p"]))
    return out


def _upper_bound(cfg, grid, task, seed):
    rng = np.random.default_rng(seed)
    b = make_symbol(cfg, grid, derive_seed(seed, 0))
    d = _random_shift(cfg, grid, rng)
    rows = []
    for p in cfg.p:
        t = make_triple(cfg, grid, seed, p)
        ratio, est, nb = upper_bound_ratio(b, d, t, d.complexity, seed=seed)
        rows.append({"p": float(p), "kind": d.kind, "complexity": d.complexity.total,
                     **d.complexity.to_dict(), "ratio": float(ratio), "norm": float(est.value),
                     "bmo_nu": float(nb), "method": est.method, "direction": est.direction,
                     "converged": est.converged})
    return rows


def _ratio_check(cfg, rows):
    return [_bound_assertion(cfg, rows, "ratio")] + _drift_assertions(
        cfg, rows, "ratio", lambda r: (r["p"],))


def _lower_bound(cfg, grid, task, seed):
    b = make_symbol(cfg, grid, derive_seed(seed, 0))
    rows = []
    for p in cfg.p:
        t = make_triple(cfg, grid, seed, p)
        ratio, est, nb = lower_bound_ratio(b, t, seed=seed)
        rows.append({"p": float(p), "ratio": float(ratio), "norm": float(est.value),
                     "bmo_nu": float(nb), "method": est.method, "direction": est.direction})
    return rows


def _journe(cfg, grid, task, seed):
    cap = tuple(int(c) for c in cfg.caps.get("cap", [1, 1]))
    ens = sample_shift_ensemble(EnsembleConfig(grid, cap, float(cfg.caps.get("delta", 0.5)),
                                               kinds=tuple(cfg.kinds)), seed)
    w = cfg.weight_config("w").build(grid, derive_seed(seed, 3))
    op = ensemble_operator(ens, grid)
    rows = []
    for p in cfg.p:
        total = operator_norm(op, w, w, float(p), seed=seed)
        singles = [operator_norm(d.operator(), w, w, float(p), seed=seed).value for _, d in ens]
        budget = sum(wgt for wgt, _ in ens) * max(singles)
        rows.append({"p": float(p), "norm": float(total.value), "triangle_bound": float(budget),
                     "ratio": float(total.value / budget), "shifts": len(ens),
                     "direction": total.direction})
    return rows


def _journe_check(cfg, rows):
    # the triangle audit is sound only when both sides are exact (p = 2)
    exact = [r for r in rows if r["direction"] == "exact"]
    worst = max((r["ratio"] for r in exact), default=0.0)
    out = [Assertion("triangle", worst <= 1.0 + 1e-9, f"max norm / bound {worst:.6f} <= 1")]
    out.append(_bound_assertion(cfg, rows, "norm"))
    return out


_SUITES = {
    "identities": (_tasks_default, _identities, _identities_check),
    "paraproduct-bounds": (_tasks_default, _paraproduct_bounds, _paraproduct_check),
    "square-sweeps": (_tasks_default, _square_sweeps, _square_check),
    "duality": (_tasks_default, _duality, _duality_check),
    "jn-equivalence": (_tasks_default, _jn, _jn_check),
    "shift-one-weight": (_shift_tasks, _shift_one_weight, _shift_check),
    "upper-bound": (_tasks_default, _upper_bound, _ratio_check),
    "lower-bound": (_tasks_default, _lower_bound, _ratio_check),
    "journe-ensemble": (_tasks_default, _journe, _journe_check),
}


def run_suite(cfg, threads=1):
    """Run every task of the suite on every grid; rows come back in task order."""
    cfg.validate()
    tasks_fn, trial_fn, check_fn = _SUITES[cfg.suite]
    tasks = tasks_fn(cfg)
    jobs = [(g, task) for g in cfg.grids() for task in tasks]

    def run(job):
        g, task = job
        # the seed depends on the task, not the grid, so refinements share coarse structure
        seed = derive_seed(cfg.seed, task["trial"])
        rows = trial_fn(cfg, g, task, seed)
        head = {"suite": cfg.suite, "config_hash": cfg.config_hash, "seed": seed,
                "trial": task["trial"], "K1": g.depths[0], "K2": g.depths[1]}
        return [{**head, **r} for r in rows]

    start = time.perf_counter()
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(run, jobs))
    else:
        chunks = [run(j) for j in jobs]
    rows = [r for chunk in chunks for r in chunk]
    report = ExperimentReport(cfg, rows, check_fn(cfg, rows), time.perf_counter() - start)
    return report


# ---------------------------------------------------------------------------
# plot data

def read_report_rows(path):
    """Rows of a report given its CSV or its JSON summary."""
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            meta = json.load(fh)
        if not meta.get("csv"):
            return []
        path = os.path.join(os.path.dirname(path), meta["csv"])
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def parse_axes(spec):
    names = [s.strip() for s in spec.split(",") if s.strip()]
    if len(names) not in (2, 3):
        raise ValueError("axes spec is 'x,y' or 'x,y,series'")
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate axis names in {spec!r}")
    return names


def emit_plot_data(rows, axes):
    """Long-format CSV with columns x, y, series from report rows."""
    names = parse_axes(axes) if isinstance(axes, str) else list(axes)
    if rows:
        missing = [n for n in names if n not in rows[0]]
        if missing:
            raise ValueError(f"unknown axis names: {missing}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "y", "series"])
    for r in rows:
        series = r[names[2]] if len(names) == 3 else names[1]
        writer.writerow([r[names[0]], r[names[1]], series])
    return buf.getvalue()


def resolve_out_dir(arg=None, cfg=None):
    if arg:
        return arg
    if os.environ.get(OUT_ENV):
        return os.environ[OUT_ENV]
    if cfg is not None and cfg.out:
        return cfg.out
    return "results"
