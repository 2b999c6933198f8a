"""Covariance-term bounds for a coherent-state modulation.

The modulation is summarised by its average state tau. From tau we build the
conjugated annihilation operator ``a_tau = tau^{1/2} a tau^{-1/2}`` and the
two scalars that drive every bound:

* ``t1 = tr(tau^{1/2} a tau^{1/2} a^dag)``, the covariance reached by a pure-loss channel
  (per unit sqrt(T), halved);
* ``w``, the average weight that ``a_tau`` moves off each signal state. It
  vanishes for a Gaussian modulation.

Given measured statistics (c1, c2, n_B), ``tr(rho C)`` lies in
``2 c1 -/+ 2 sqrt(w (n_B - c2^2 / <n>))``.

For nearly lossless links combined with large excess noise the lower end of
the interval is loose compared with a full semidefinite optimisation; it is
still a valid bound there.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from . import fock
from .constellation import Constellation, moments
from .errors import NonPhysicalError, TruncationError

TAIL_TOL = 1e-8
NEG_TOL = 1e-10
SLACK_TOL = 1e-9


@dataclass(frozen=True)
class ModulationAnalysis:
    mean_photon: float
    w: float
    t1: float
    dim: Optional[int] = None
    tau: Optional[np.ndarray] = None
    tau_sqrt: Optional[np.ndarray] = None
    tau_pinv_sqrt: Optional[np.ndarray] = None
    a_tau: Optional[np.ndarray] = None
    alpha_tau: Optional[np.ndarray] = None
    tail_mass: float = 0.0
    rank: Optional[int] = None
    constellation: Optional[Constellation] = None
    analytic: bool = False

    @property
    def V_A(self):
        return 2.0 * self.mean_photon

    # photon number of the signal centres; equals mean_photon for coherent states
    @property
    def center_photon(self):
        return self.mean_photon


@dataclass(frozen=True)
class ChannelStats:
    c1: float
    c2: float
    nB: float

    def __post_init__(self):
        if self.nB < 0:
            raise NonPhysicalError(f"n_B must be >= 0, got {self.nB}")


@dataclass(frozen=True)
class ZInterval:
    low: float
    high: float

    @property
    def mid(self):
        return 0.5 * (self.low + self.high)

    @property
    def width(self):
        return self.high - self.low


def analyze(c, dim=None, rank_tol=fock.RANK_TOL, allow_truncation=False):
    """Fock-space analysis of a constellation.

    ``dim`` defaults to :func:`fock.auto_dim` on the largest |alpha_k|^2.
    Raises :class:`TruncationError` if the probability-weighted tail mass
    exceeds 1e-8, unless ``allow_truncation`` is set (then it only warns).
    """
    if dim is None:
        dim = fock.auto_dim(c.max_photon)
    vecs = fock.coherent_matrix(c.points, dim)
    norms = np.sum(np.abs(vecs) ** 2, axis=0).real
    tail = float(np.sum(c.probs * np.clip(1.0 - norms, 0.0, None)))
    if tail >= TAIL_TOL:
        msg = f"Fock truncation at dim={dim} discards weight {tail:.2e}"
        if not allow_truncation:
            raise TruncationError(msg + "; raise dim or pass allow_truncation=True")
        warnings.warn(msg, stacklevel=2)

    tau = (vecs * c.probs) @ vecs.conj().T
    s, s_pinv = fock.sqrt_and_pinv_sqrt(tau, rank_tol=rank_tol)
    a = fock.annihilation(dim)
    a_tau = s @ a @ s_pinv

    t1c = np.trace(s @ a @ s @ a.conj().T)
    if abs(t1c.imag) > 1e-10 * max(1.0, abs(t1c.real)):
        raise NonPhysicalError(f"tr(tau^1/2 a tau^1/2 a^dag) has imaginary part {t1c.imag:.3e}")

    mapped = a_tau @ vecs
    alpha_tau = np.einsum("ik,ik->k", vecs.conj(), mapped)
    spread = np.sum(np.abs(mapped) ** 2, axis=0).real - np.abs(alpha_tau) ** 2
    w = float(np.sum(c.probs * spread))
    if w < -NEG_TOL:
        raise NonPhysicalError(f"w = {w:.3e} is negative beyond round-off")
    lam = fock.herm_eig(tau).eigenvalues

    return ModulationAnalysis(
        mean_photon=moments(c).mean_photon,
        w=max(w, 0.0),
        t1=float(t1c.real),
        dim=dim,
        tau=tau,
        tau_sqrt=s,
        tau_pinv_sqrt=s_pinv,
        a_tau=a_tau,
        alpha_tau=alpha_tau,
        tail_mass=tail,
        rank=int(np.sum(lam > rank_tol * lam[0])),
        constellation=c,
    )


def gaussian_analysis(mean_photon):
    """Closed-form analysis of a Gaussian modulation with ``mean_photon`` photons.

    a_tau is a rescaled annihilation operator here, so w = 0 exactly and no
    Fock matrices are built.
    """
    if not mean_photon > 0:
        raise ValueError(f"mean_photon must be > 0, got {mean_photon}")
    n = float(mean_photon)
    return ModulationAnalysis(mean_photon=n, w=0.0, t1=math.sqrt(n * n + n), analytic=True)


def thermal_analysis(mean_photon, dim, rank_tol=fock.RANK_TOL):
    """Gaussian modulation evaluated on a truncated thermal average state.

    A numerical counterpart of :func:`gaussian_analysis`. The average of
    |<alpha|a_tau|alpha>|^2 over the Gaussian ensemble depends on |alpha| only,
    so it reduces to a one-dimensional integral over u = |alpha|^2.
    """
    n = float(mean_photon)
    if not n > 0:
        raise ValueError(f"mean_photon must be > 0, got {mean_photon}")
    tau = np.diag(fock.thermal_diag(n, dim)).astype(complex)
    tau /= np.trace(tau).real
    s, s_pinv = fock.sqrt_and_pinv_sqrt(tau, rank_tol=rank_tol)
    a = fock.annihilation(dim)
    a_tau = s @ a @ s_pinv
    t1 = float(np.trace(s @ a @ s @ a.conj().T).real)
    first = float(np.trace(tau @ a_tau.conj().T @ a_tau).real)
    sup = np.real(np.diag(a_tau, 1))

    def integrand(u):
        v = fock.coherent_vector(math.sqrt(u), dim).real
        return (math.exp(-u / n) / n) * float(np.dot(v[:-1] * sup, v[1:])) ** 2

    second, _ = integrate.quad(integrand, 0.0, 60.0 * n, limit=400, epsabs=1e-13, epsrel=1e-12)
    return ModulationAnalysis(
        mean_photon=n,
        w=max(first - second, 0.0),
        t1=t1,
        dim=dim,
        tau=tau,
        tau_sqrt=s,
        tau_pinv_sqrt=s_pinv,
        a_tau=a_tau,
    )


def excess_slack(nB, c2, mean_photon):
    """n_B - c2^2 / <n>, set to 0 within round-off."""
    slack = nB - c2 * c2 / mean_photon
    if slack < -SLACK_TOL:
        raise NonPhysicalError(
            f"n_B - c2^2/<n> = {slack:.3e} < 0: statistics violate Cauchy-Schwarz"
        )
    # round-off from nB - c2^2/<n> on exactly noiseless statistics
    if slack <= 1e-13 * max(1.0, nB):
        return 0.0
    return slack


def z_interval(an, stats):
    """Range of tr(rho C) compatible with the measured statistics."""
    half = 2.0 * math.sqrt(an.w * excess_slack(stats.nB, stats.c2, an.mean_photon))
    mid = 2.0 * stats.c1
    return ZInterval(mid - half, mid + half)


def expected_stats(an, T, xi):
    """Statistics expected from a phase-insensitive Gaussian channel (T, xi)."""
    _check_channel(T, xi)
    rt = math.sqrt(T)
    n = an.mean_photon
    return ChannelStats(c1=rt * an.t1, c2=rt * n, nB=T * n + T * xi / 2.0)


def z_star_gaussian_channel(an, T, xi):
    _check_channel(T, xi)
    return 2.0 * math.sqrt(T) * an.t1 - math.sqrt(2.0 * T * xi * an.w)


def _check_channel(T, xi):
    if not 0 < T <= 1:
        raise ValueError(f"transmittance must lie in (0, 1], got {T}")
    if xi < 0:
        raise ValueError(f"excess noise must be >= 0, got {xi}")


def psk_nu(M, alpha):
    """Weights nu_k = sum_n alpha^{2(nM+k)} / (nM+k)!, via the discrete Fourier form."""
    theta = 2.0 * math.pi / M
    j = np.arange(M)
    # scale by exp(-alpha^2) to stay finite; callers compensate
    mu = np.exp(alpha**2 * (np.exp(1j * j * theta) - 1.0))
    nu = np.array([np.mean(np.exp(-1j * j * k * theta) * mu) for k in range(M)])
    if np.max(np.abs(nu.imag)) > 1e-12:
        raise ArithmeticError("PSK eigenvalue weights acquired an imaginary part")
    return nu.real


def psk_closed_form(M, alpha, T, xi):
    """Lower end of the covariance interval for M-PSK over a Gaussian channel.

    Independent of any Fock truncation; used as a cross-check of the generic path.
    """
    if int(M) != M or M < 2 or not alpha > 0:
        raise ValueError("need integer M >= 2 and alpha > 0")
    _check_channel(T, xi)
    nu = psk_nu(int(M), alpha)  # already carries the exp(-alpha^2) factor
    nxt = np.roll(nu, -1)
    s32 = float(np.sum(nu**1.5 / np.sqrt(nxt)))
    s2 = float(np.sum(nu**2 / nxt))
    a2 = alpha * alpha
    radicand = s2 - s32 * s32
    assert radicand > -1e-12, radicand
    return math.sqrt(T) * (2.0 * a2 * s32 - math.sqrt(2.0 * xi * a2) * math.sqrt(max(radicand, 0.0)))


def psk_w_t1(M, alpha):
    """(w, t1) of M-PSK in closed form."""
    nu = psk_nu(int(M), alpha)
    nxt = np.roll(nu, -1)
    s32 = float(np.sum(nu**1.5 / np.sqrt(nxt)))
    s2 = float(np.sum(nu**2 / nxt))
    a2 = alpha * alpha
    return max(a2 * (s2 - s32 * s32), 0.0), a2 * s32
