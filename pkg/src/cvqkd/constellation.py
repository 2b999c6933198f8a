"""Modulation alphabets: coherent-state amplitudes with their probabilities."""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import comb

PROB_TOL = 1e-12


@dataclass(frozen=True)
class Constellation:
    """Coherent amplitudes ``points`` sent with probabilities ``probs``.

    Duplicate points are allowed and kept separate.
    """

    points: np.ndarray
    probs: np.ndarray
    label: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=complex).ravel()
        pr = np.array(self.probs, dtype=float).ravel()
        if pts.size == 0:
            raise ValueError("constellation must contain at least one point")
        if pts.shape != pr.shape:
            raise ValueError(f"{pts.size} points but {pr.size} probabilities")
        if not np.all(np.isfinite(pts)):
            raise ValueError("constellation points must be finite")
        if not np.all(np.isfinite(pr)) or np.any(pr <= 0):
            raise ValueError("probabilities must be finite and strictly positive")
        if abs(pr.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {pr.sum()!r}, not 1")
        pts.setflags(write=False)
        pr.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", pr)

    def __len__(self):
        return self.points.size

    @property
    def max_photon(self):
        return float(np.max(np.abs(self.points) ** 2))

    def conjugate(self):
        return Constellation(np.conj(self.points), self.probs, self.label + "*")


@dataclass(frozen=True)
class ConstellationMoments:
    mean: complex
    mean_photon: float
    V_A: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "V_A", 2.0 * self.mean_photon)


def moments(c):
    return ConstellationMoments(
        mean=complex(np.sum(c.probs * c.points)),
        mean_photon=float(np.sum(c.probs * np.abs(c.points) ** 2)),
    )


def psk(M, alpha):
    """M points alpha * exp(2 pi i k / M), uniformly weighted."""
    if int(M) != M or M < 2:
        raise ValueError(f"PSK order must be an integer >= 2, got {M}")
    if not alpha > 0:
        raise ValueError(f"PSK amplitude must be > 0, got {alpha}")
    M = int(M)
    k = np.arange(M)
    pts = alpha * np.exp(2j * np.pi * k / M)
    return Constellation(pts, np.full(M, 1.0 / M), f"{M}-PSK(alpha={alpha:g})")


def _normalise(weights):
    w = np.asarray(weights, dtype=float)
    w = np.where(w < 1e-300, 0.0, w)
    return w / w.sum()


def _square_grid(coord, coord_probs, label):
    pts = (coord[:, None] + 1j * coord[None, :]).ravel()
    pr = (coord_probs[:, None] * coord_probs[None, :]).ravel()
    keep = pr > 0
    pr = pr[keep] / pr[keep].sum()
    return Constellation(pts[keep], pr, label)


def qam_binomial(m, V_A):
    """m x m square QAM with independent binomial(m-1, 1/2) shaping per quadrature.

    Per-coordinate variance is V_A / 4, so the mean photon number is V_A / 2.
    """
    if int(m) != m or m < 2:
        raise ValueError(f"QAM side must be an integer >= 2, got {m}")
    if not V_A > 0:
        raise ValueError(f"V_A must be > 0, got {V_A}")
    m = int(m)
    alpha = math.sqrt(V_A / 2.0)
    k = np.arange(m)
    coord = alpha * math.sqrt(2.0) / math.sqrt(m - 1) * (k - (m - 1) / 2.0)
    coord_probs = np.array([comb(m - 1, i, exact=True) for i in k], dtype=float)
    coord_probs /= 2.0 ** (m - 1)
    return _square_grid(coord, coord_probs, f"{m * m}-QAM binomial(V_A={V_A:g})")


def _grid_variance(spacing, m, nu):
    x = spacing * (np.arange(m) - (m - 1) / 2.0)
    q = _normalise(np.exp(-nu * x**2))
    return float(np.sum(q * x**2))


def discrete_gaussian_spacing(m, V_A, nu, tol=1e-12):
    """Grid spacing whose discrete-Gaussian per-coordinate variance is V_A / 4.

    Bisection on the spacing. For odd ``m`` the variance is bounded, and an
    unreachable target raises ValueError.
    """
    target = V_A / 4.0
    hi = math.sqrt(target) + 1e-3
    prev = 0.0
    while (var := _grid_variance(hi, m, nu)) <= target:
        if var < prev or hi > 1e6:
            # past the variance peak (odd m): locate it before giving up
            res = minimize_scalar(
                lambda s: -_grid_variance(s, m, nu), bounds=(hi / 4.0, hi), method="bounded"
            )
            if -res.fun <= target:
                raise ValueError(
                    f"no grid spacing reaches per-coordinate variance {target:g} "
                    f"for m={m}, nu={nu:g}"
                )
            hi = float(res.x)
            break
        prev = var
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        var = _grid_variance(mid, m, nu)
        if abs(var - target) <= tol * target:
            return mid
        if var < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def qam_discrete_gaussian(m, V_A, nu):
    """m x m square QAM with weights proportional to exp(-nu |alpha|^2)."""
    if int(m) != m or m < 2:
        raise ValueError(f"QAM side must be an integer >= 2, got {m}")
    if not V_A > 0 or not nu > 0:
        raise ValueError("V_A and nu must be > 0")
    m = int(m)
    spacing = discrete_gaussian_spacing(m, V_A, nu)
    coord = spacing * (np.arange(m) - (m - 1) / 2.0)
    coord_probs = _normalise(np.exp(-nu * coord**2))
    return _square_grid(
        coord, coord_probs, f"{m * m}-QAM discrete-Gaussian(V_A={V_A:g}, nu={nu:g})"
    )


def to_json(c):
    return {
        "points": [[float(z.real), float(z.imag)] for z in c.points],
        "probs": [float(p) for p in c.probs],
        "label": c.label,
    }


def from_json(obj):
    try:
        pts = [complex(re, im) for re, im in obj["points"]]
        probs = obj["probs"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed constellation document: {exc}") from exc
    return Constellation(pts, probs, obj.get("label", ""))


def load(path):
    with open(path) as fh:
        return from_json(json.load(fh))


def save(c, path):
    with open(path, "w") as fh:
        json.dump(to_json(c), fh, indent=2)
