"""Scan engine behind the command-line interface.

A modulation is described by a short descriptor string:

    psk:M,alpha   qam-bin:m,V_A   qam-dg:m,V_A,nu   gauss:V_A   file:PATH

Analyses are cached per (modulation, V_A, dim), so sweeps over distance or
excess noise pay for the Fock-space eigendecomposition once.
"""

import csv
import functools
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from . import bound, constellation, keyrate, mixed

DEFAULT_BETA = 0.95
VA_BRACKET = (0.05, 20.0)
XI_BRACKET = (0.0, 0.5)
XI_ITERATIONS = 60
VA_TOL = 1e-3
VA_GRID_POINTS = 25


def distance_to_transmittance(d_km):
    return 10.0 ** (-0.02 * d_km)


def transmittance_to_distance(T):
    return -50.0 * math.log10(T)


@dataclass(frozen=True)
class Modulation:
    kind: str
    params: tuple = ()
    path: Optional[str] = None

    @classmethod
    def parse(cls, text):
        kind, _, rest = text.partition(":")
        kind = kind.strip().lower()
        if kind == "file":
            if not rest:
                raise ValueError("file modulation needs a path: file:PATH")
            return cls(kind, (), rest)
        arity = {"psk": 2, "qam-bin": 2, "qam-dg": 3, "gauss": 1}
        if kind not in arity:
            raise ValueError(
                f"unknown modulation {kind!r}; use psk:M,alpha | qam-bin:m,Va | "
                "qam-dg:m,Va,nu | gauss:Va | file:PATH"
            )
        try:
            params = tuple(float(x) for x in rest.split(",")) if rest else ()
        except ValueError:
            raise ValueError(f"non-numeric parameters in modulation {text!r}") from None
        if len(params) != arity[kind]:
            raise ValueError(f"{kind} takes {arity[kind]} parameters, got {len(params)} in {text!r}")
        if kind in ("psk", "qam-bin", "qam-dg") and params[0] != int(params[0]):
            raise ValueError(f"{kind} size must be an integer, got {params[0]}")
        return cls(kind, params)

    def __str__(self):
        if self.kind == "file":
            return f"file:{self.path}"
        return f"{self.kind}:" + ",".join(f"{p:g}" for p in self.params)

    @property
    def V_A(self):
        if self.kind == "psk":
            return 2.0 * self.params[1] ** 2
        if self.kind in ("qam-bin", "qam-dg", "gauss"):
            return self.params[1] if self.kind != "gauss" else self.params[0]
        return analysis_for(self).V_A

    def with_va(self, V_A):
        """Same family with modulation variance V_A."""
        if self.kind == "psk":
            return replace(self, params=(self.params[0], math.sqrt(V_A / 2.0)))
        if self.kind in ("qam-bin", "qam-dg"):
            p = list(self.params)
            p[1] = V_A
            return replace(self, params=tuple(p))
        if self.kind == "gauss":
            return replace(self, params=(V_A,))
        raise ValueError("the modulation variance of a file constellation is fixed")

    def with_alpha(self, alpha):
        if self.kind != "psk":
            raise ValueError("alpha sweeps apply to PSK modulations only")
        return replace(self, params=(self.params[0], alpha))

    def build(self):
        """Constellation, MixedConstellation, or None for a Gaussian modulation."""
        k, p = self.kind, self.params
        if k == "psk":
            return constellation.psk(int(p[0]), p[1])
        if k == "qam-bin":
            return constellation.qam_binomial(int(p[0]), p[1])
        if k == "qam-dg":
            return constellation.qam_discrete_gaussian(int(p[0]), p[1], p[2])
        if k == "gauss":
            return None
        with open(self.path) as fh:
            doc = json.load(fh)
        if "centers" in doc:
            return mixed.from_json(doc)
        return constellation.from_json(doc)


@functools.lru_cache(maxsize=256)
def analysis_for(mod, dim=None):
    """Cached analysis of a modulation (Fock-space, mixed, or analytic Gaussian)."""
    if mod.kind == "gauss":
        return bound.gaussian_analysis(mod.params[0] / 2.0)
    built = mod.build()
    if isinstance(built, mixed.MixedConstellation):
        return mixed.analyze_mixed(built)
    return bound.analyze(built, dim=dim)


@dataclass(frozen=True)
class ScanRow:
    d_km: float
    T: float
    xi: float
    V_A: float
    K: float
    chi: float
    mutual_info: float
    Z_low: float
    Z_high: float
    w: float
    t1: float


@dataclass
class ScanConfig:
    modulation: str
    distances: Optional[list] = None
    transmittances: Optional[list] = None
    xi: list = field(default_factory=lambda: [0.0])
    beta: float = DEFAULT_BETA
    detection: str = keyrate.HETERODYNE
    dim: Optional[int] = None
    va_grid: Optional[list] = None
    alpha_grid: Optional[list] = None
    optimize_va: bool = False
    va_bracket: tuple = VA_BRACKET
    mutual_info: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        if self.distances is not None and self.transmittances is not None:
            raise ValueError("give either distances or transmittances, not both")
        for name in ("distances", "transmittances", "xi", "va_grid", "alpha_grid"):
            v = getattr(self, name)
            if v is not None and len(v) == 0:
                raise ValueError(f"{name} grid is empty")
        if self.transmittances is not None and any(not 0 < t <= 1 for t in self.transmittances):
            raise ValueError("transmittances must lie in (0, 1]")
        if self.distances is not None and any(d < 0 for d in self.distances):
            raise ValueError("distances must be >= 0 km")
        if any(x < 0 for x in self.xi):
            raise ValueError("excess noise must be >= 0")
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if self.detection not in keyrate.DETECTIONS:
            raise ValueError(f"detection must be one of {keyrate.DETECTIONS}")
        if self.detection == keyrate.HOMODYNE and self.mutual_info is None:
            raise ValueError("homodyne detection needs --mutual-info (no closed form is provided)")
        lo, hi = self.va_bracket
        if not 0 < lo < hi:
            raise ValueError(f"invalid V_A bracket {self.va_bracket}")
        self.mod = Modulation.parse(self.modulation)

    def channel_points(self):
        """(d_km, T) pairs; distance is NaN-free when T was given directly."""
        if self.distances is not None:
            return [(float(d), distance_to_transmittance(d)) for d in self.distances]
        if self.transmittances is not None:
            return [(transmittance_to_distance(t), float(t)) for t in self.transmittances]
        raise ValueError("no channel given: pass distances or transmittances")


def evaluate(an, d_km, T, xi, cfg):
    r = keyrate.key_rate(an, T, xi, cfg.beta, cfg.detection, cfg.mutual_info)
    return ScanRow(
        d_km=d_km,
        T=T,
        xi=xi,
        V_A=an.V_A,
        K=r.K,
        chi=r.chi,
        mutual_info=r.mutual_info,
        Z_low=r.z_low,
        Z_high=r.z_high,
        w=an.w,
        t1=an.t1,
    )


def _pmap(fn, items, workers):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def cmd_rate(cfg):
    pts = cfg.channel_points()
    if len(pts) != 1 or len(cfg.xi) != 1:
        raise ValueError("rate evaluates a single point: give one distance/transmittance and one xi")
    d, T = pts[0]
    return evaluate(analysis_for(cfg.mod, cfg.dim), d, T, cfg.xi[0], cfg)


def cmd_scan(cfg):
    """Rows over exactly one swept axis: channel points, V_A, or PSK alpha."""
    axes = [
        len(cfg.channel_points()) > 1,
        cfg.va_grid is not None,
        cfg.alpha_grid is not None,
    ]
    if sum(axes) != 1:
        raise ValueError("scan needs exactly one grid: several distances/transmittances, --va-grid or --alpha-grid")
    if len(cfg.xi) != 1:
        raise ValueError("scan takes a single xi value")
    xi = cfg.xi[0]
    if axes[0]:
        an = analysis_for(cfg.mod, cfg.dim)
        return _pmap(lambda p: evaluate(an, p[0], p[1], xi, cfg), cfg.channel_points(), cfg.workers)
    d, T = cfg.channel_points()[0]
    if axes[1]:
        mods = [cfg.mod.with_va(v) for v in cfg.va_grid]
    else:
        mods = [cfg.mod.with_alpha(a) for a in cfg.alpha_grid]
    return _pmap(lambda m: evaluate(analysis_for(m, cfg.dim), d, T, xi, cfg), mods, cfg.workers)


def golden_max(f, lo, hi, tol=VA_TOL, f_lo=None, f_hi=None):
    """Golden-section maximum of a unimodal f on [lo, hi]; returns (x, f(x))."""
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    best = max([(fc, c), (fd, d)] + [(v, x) for v, x in ((f_lo, lo), (f_hi, hi)) if v is not None])
    return best[1], best[0]


def maximize_va(f, bracket=VA_BRACKET, tol=VA_TOL, grid_points=VA_GRID_POINTS):
    """Maximise f(V_A) on ``bracket``.

    A log-spaced grid locates the best cell first; golden-section search then
    refines inside the two neighbouring cells. This guards against plateaus
    (e.g. zero tolerable noise) that break plain golden-section search.
    """
    lo, hi = bracket
    grid = np.geomspace(lo, hi, grid_points)
    vals = [f(float(v)) for v in grid]
    i = int(np.argmax(vals))
    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, len(grid) - 1)])
    x, fx = golden_max(
        f,
        a,
        b,
        tol,
        f_lo=vals[max(i - 1, 0)],
        f_hi=vals[min(i + 1, len(grid) - 1)],
    )
    if vals[i] > fx:
        x, fx = float(grid[i]), vals[i]
    interior = vals[1:-1]
    if interior and max(vals[0], vals[-1]) > max(interior):
        warnings.warn(
            f"maximum sits at the bracket edge (V_A={x:.4g}); widen the bracket if this is unexpected",
            stacklevel=2,
        )
    return x, fx


def cmd_optimize_va(cfg):
    """(V_A_opt, K_opt) at a single channel point."""
    pts = cfg.channel_points()
    if len(pts) != 1 or len(cfg.xi) != 1:
        raise ValueError("optimize-va needs one channel point and one xi")
    d, T = pts[0]
    xi = cfg.xi[0]

    def k_of(v):
        return evaluate(analysis_for(cfg.mod.with_va(v), cfg.dim), d, T, xi, cfg).K

    return maximize_va(k_of, cfg.va_bracket)


@dataclass(frozen=True)
class XiMaxPoint:
    d_km: float
    T: float
    xi_max: float
    V_A: float
    # "ok", "no-key" (K <= 0 already at xi = 0) or "bracket-exhausted" (K > 0 at the upper end)
    status: str


def xi_root(an, T, cfg, bracket=XI_BRACKET, iterations=XI_ITERATIONS):
    """Largest xi with K > 0 by bisection; K is decreasing in xi."""
    lo, hi = bracket

    def k_of(xi):
        return keyrate.key_rate(an, T, xi, cfg.beta, cfg.detection, cfg.mutual_info).K

    k_lo, k_hi = k_of(lo), k_of(hi)
    if k_lo <= 0:
        return lo, "no-key"
    if k_hi > 0:
        return hi, "bracket-exhausted"
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if k_of(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo, "ok"


def cmd_xi_max(cfg):
    """Tolerable excess noise per channel point, optionally maximised over V_A.

    With V_A optimisation the result is max over V_A of the per-V_A root,
    which equals the root of max over V_A of K because K decreases in xi.
    """

    def one(point):
        d, T = point
        if not cfg.optimize_va:
            an = analysis_for(cfg.mod, cfg.dim)
            x, status = xi_root(an, T, cfg)
            return XiMaxPoint(d, T, x, an.V_A, status)
        statuses = {}

        def root_of(v):
            x, statuses[v] = xi_root(analysis_for(cfg.mod.with_va(v), cfg.dim), T, cfg)
            return x

        v, x = maximize_va(root_of, cfg.va_bracket)
        return XiMaxPoint(d, T, x, v, statuses.get(v, "ok") if x > 0 else "no-key")

    return _pmap(one, cfg.channel_points(), cfg.workers)


def dump_rows(c):
    """(re, im, prob) rows of a constellation."""
    return [(float(z.real), float(z.imag), float(p)) for z, p in zip(c.points, c.probs)]


def cmd_dump_constellation(cfg):
    built = cfg.mod.build()
    if built is None:
        raise ValueError("a Gaussian modulation has no finite constellation to dump")
    if isinstance(built, mixed.MixedConstellation):
        return [(float(z.real), float(z.imag), float(p)) for z, p in zip(built.centers, built.probs)]
    return dump_rows(built)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def to_csv(rows, header=None):
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    if rows and hasattr(rows[0], "__dataclass_fields__"):
        header = [f.name for f in fields(rows[0])]
        rows = [[getattr(r, h) for h in header] for r in rows]
    if header:
        out.writerow(header)
    for r in rows:
        out.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def to_json(rows, header=None):
    if rows and hasattr(rows[0], "__dataclass_fields__"):
        return json.dumps([asdict(r) for r in rows], indent=2)
    return json.dumps([dict(zip(header, r)) for r in rows], indent=2)
