"""Devetak-Winter key rate from the symmetrised two-mode covariance matrix.

Gamma' = [[V 1, Z sigma_z], [Z sigma_z, W 1]] with shot-noise units where the
vacuum has variance 1. Entropies are in bits.
"""

import math
from dataclasses import dataclass
from typing import Optional

from . import bound, mixed
from .errors import NonPhysicalError

HETERODYNE = "heterodyne"
HOMODYNE = "homodyne"
DETECTIONS = (HETERODYNE, HOMODYNE)
PHYS_TOL = 1e-9


@dataclass(frozen=True)
class CovarianceParams:
    V: float
    W: float
    Z: float

    def __post_init__(self):
        if self.V < 1 - PHYS_TOL or self.W < 1 - PHYS_TOL:
            raise NonPhysicalError(f"V={self.V}, W={self.W}: diagonal entries must be >= 1")

    @property
    def det(self):
        return self.V * self.W - self.Z * self.Z

    def check_physical(self):
        if self.det < 1 - PHYS_TOL:
            raise NonPhysicalError(
                f"VW - Z^2 = {self.det:.6g} < 1: not the covariance matrix of a quantum state"
            )


@dataclass(frozen=True)
class KeyRateResult:
    nu1: float
    nu2: float
    nu3: float
    chi: float
    mutual_info: float
    beta: float
    K: float
    detection: str
    z_used: float
    V: float
    W: float
    z_low: float
    z_high: float
    # False if the upper endpoint gave an unphysical Gamma' and was skipped
    z_high_physical: bool = True


def g_entropy(x):
    """Von Neumann entropy (bits) of a thermal state with mean photon number x."""
    if x < -1e-12:
        raise ValueError(f"g is defined for x >= 0, got {x}")
    if x <= 0:
        return 0.0
    return (x + 1) * math.log2(x + 1) - x * math.log2(x)


def symplectic_eigs(cp):
    """(nu1, nu2), nu1 >= nu2, of Gamma'."""
    cp.check_physical()
    delta = cp.V**2 + cp.W**2 - 2 * cp.Z**2
    d = cp.det
    disc = delta * delta - 4 * d * d
    if disc < -PHYS_TOL * max(1.0, delta * delta):
        raise NonPhysicalError(f"negative discriminant {disc:.3e} in symplectic spectrum")
    root = math.sqrt(max(disc, 0.0))
    nu1 = math.sqrt((delta + root) / 2)
    nu2 = math.sqrt(max((delta - root) / 2, 0.0))
    if nu2 < 1 - PHYS_TOL:
        raise NonPhysicalError(f"symplectic eigenvalue {nu2:.6g} < 1")
    return nu1, nu2


def nu3(cp, detection=HETERODYNE):
    """Symplectic eigenvalue of Alice's mode conditioned on Bob's measurement."""
    cp.check_physical()
    if detection == HETERODYNE:
        return cp.V - cp.Z**2 / (cp.W + 1)
    if detection == HOMODYNE:
        rad = cp.V * (cp.V - cp.Z**2 / cp.W)
        if rad < 0:
            raise NonPhysicalError(f"negative radicand {rad:.3e} in homodyne nu3")
        return math.sqrt(rad)
    raise ValueError(f"unknown detection {detection!r}; expected one of {DETECTIONS}")


def holevo_terms(cp, detection=HETERODYNE):
    n1, n2 = symplectic_eigs(cp)
    n3 = nu3(cp, detection)
    chi = g_entropy((n1 - 1) / 2) + g_entropy((n2 - 1) / 2) - g_entropy((n3 - 1) / 2)
    return n1, n2, n3, chi


def holevo(cp, detection=HETERODYNE):
    """Holevo information chi(Y;E) of the Gaussian state with covariance Gamma'."""
    return holevo_terms(cp, detection)[3]


def mutual_info_from_snr(snr):
    return math.log2(1.0 + snr)


def mutual_info_gaussian(V_A, T, xi):
    """Heterodyne mutual information, both quadratures, in bits."""
    if V_A < 0 or T < 0 or xi < 0 or T > 1:
        raise ValueError("need V_A, xi >= 0 and 0 <= T <= 1")
    return mutual_info_from_snr(T * V_A / (2 + T * xi))


def _chi_over_interval(V, W, interval, detection):
    ends = [interval.low] if interval.width == 0 else [interval.low, interval.high]
    best = None
    high_ok = True
    for i, z in enumerate(ends):
        cp = CovarianceParams(V, W, z)
        try:
            terms = holevo_terms(cp, detection)
        except NonPhysicalError:
            if i == 0:
                raise
            high_ok = False
            continue
        if best is None or terms[3] > best[1][3]:
            best = (z, terms)
    return best[0], best[1], high_ok


def _assemble(an, V, W, interval, mi, beta, detection):
    if not 0 < beta <= 1:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    z, (n1, n2, n3, chi), high_ok = _chi_over_interval(V, W, interval, detection)
    return KeyRateResult(
        nu1=n1,
        nu2=n2,
        nu3=n3,
        chi=chi,
        mutual_info=mi,
        beta=beta,
        K=beta * mi - chi,
        detection=detection,
        z_used=z,
        V=V,
        W=W,
        z_low=interval.low,
        z_high=interval.high,
        z_high_physical=high_ok,
    )


def _require_mi(detection, mutual_info):
    if detection not in DETECTIONS:
        raise ValueError(f"unknown detection {detection!r}; expected one of {DETECTIONS}")
    if detection == HOMODYNE and mutual_info is None:
        raise ValueError("homodyne key rates need a user-supplied mutual information")


def key_rate(an, T, xi, beta=0.95, detection=HETERODYNE, mutual_info: Optional[float] = None):
    """Key rate over a Gaussian channel of transmittance T and excess noise xi.

    ``an`` is a :class:`bound.ModulationAnalysis` or :class:`mixed.MixedAnalysis`.
    chi is the larger of its values at the two ends of the Z interval.
    """
    _require_mi(detection, mutual_info)
    n_tot = an.mean_photon
    n_sig = an.center_photon
    V = 1 + 2 * n_tot
    W = 1 + 2 * (T * n_tot + T * xi / 2)
    if isinstance(an, mixed.MixedAnalysis):
        interval = mixed.z_interval_mixed(an, mixed.expected_stats_mixed(an, T, xi))
    else:
        low = bound.z_star_gaussian_channel(an, T, xi)
        interval = bound.ZInterval(low, 4 * math.sqrt(T) * an.t1 - low)
    if mutual_info is None:
        mutual_info = mutual_info_from_snr(T * n_sig / (1 + T * (n_tot - n_sig) + T * xi / 2))
    return _assemble(an, V, W, interval, mutual_info, beta, detection)


def key_rate_from_stats(an, stats, beta=0.95, detection=HETERODYNE, mutual_info=None):
    """Key rate from measured (c1, c2, n_B).

    Unless given, the mutual information uses the Gaussian formula with the
    transmittance and noise implied by c2 and n_B.
    """
    _require_mi(detection, mutual_info)
    V = 1 + 2 * an.mean_photon
    W = 1 + 2 * stats.nB
    if isinstance(an, mixed.MixedAnalysis):
        interval = mixed.z_interval_mixed(an, stats)
    else:
        interval = bound.z_interval(an, stats)
    if mutual_info is None:
        n_sig = an.center_photon
        t_eff = stats.c2**2 / n_sig**2
        noise = stats.nB - t_eff * n_sig
        if noise < -bound.SLACK_TOL:
            raise NonPhysicalError(f"statistics imply negative output noise {noise:.3e}")
        mutual_info = mutual_info_from_snr(t_eff * n_sig / (1 + max(noise, 0.0)))
    return _assemble(an, V, W, interval, mutual_info, beta, detection)
