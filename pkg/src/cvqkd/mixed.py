"""Covariance bounds when each signal is an arbitrary (possibly mixed) state.

Alice's entanglement-based measurement is then a POVM ``P_k = p_k
conj(tau)^{-1/2} conj(tau_k) conj(tau)^{-1/2}`` instead of a projective one.
The interval picks up a shift proportional to ``corr`` which vanishes when
the ``P_k`` are mutually orthogonal projectors (pure coherent signals).

The optimisation variable of the bound is fixed at ``t = c2 / g2norm``, the
value that minimises the square-root term; this is not guaranteed optimal.
"""

import json
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import fock
from .bound import ChannelStats, ZInterval, _check_channel
from .errors import NonPhysicalError

STATE_TOL = 1e-10
CENTER_TOL = 1e-8
RESOLUTION_TOL = 1e-8
CORR_TOL = 1e-9


@dataclass(frozen=True)
class MixedConstellation:
    states: tuple
    probs: np.ndarray
    centers: np.ndarray
    label: str = ""

    def __post_init__(self):
        states = tuple(np.asarray(s, dtype=complex) for s in self.states)
        probs = np.array(self.probs, dtype=float).ravel()
        centers = np.array(self.centers, dtype=complex).ravel()
        if not states or len(states) != probs.size or probs.size != centers.size:
            raise ValueError("states, probs and centers must be non-empty and of equal length")
        if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be positive and sum to 1")
        dim = states[0].shape[0]
        a = fock.annihilation(dim)
        for k, s in enumerate(states):
            if s.shape != (dim, dim):
                raise ValueError(f"state {k} has shape {s.shape}, expected {(dim, dim)}")
            if not fock.is_hermitian(s):
                raise ValueError(f"state {k} is not Hermitian")
            if abs(np.trace(s).real - 1.0) > STATE_TOL:
                raise ValueError(f"state {k} has trace {np.trace(s).real!r}")
            if fock.herm_eig(s).eigenvalues[-1] < -STATE_TOL:
                raise NonPhysicalError(f"state {k} is not positive semidefinite")
            first = np.trace(s @ a)
            if abs(first - centers[k]) > CENTER_TOL:
                raise ValueError(
                    f"state {k}: tr(tau_k a) = {first:.6g} disagrees with center {centers[k]:.6g}"
                )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "centers", centers)

    @property
    def dim(self):
        return self.states[0].shape[0]


@dataclass(frozen=True)
class MixedAnalysis:
    tau: np.ndarray
    tau_sqrt: np.ndarray
    tau_pinv_sqrt: np.ndarray
    P: tuple
    z: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    w: float
    corr: float
    g2norm: float
    mean_photon: float
    center_photon: float
    t1: float
    overlaps: np.ndarray
    mixed: MixedConstellation

    @property
    def V_A(self):
        return 2.0 * self.mean_photon


def thermal_state(center, n_th, dim):
    """Displaced thermal state D(center) rho_th D(center)^dag, trace renormalised."""
    rho = np.diag(fock.thermal_diag(n_th, dim)).astype(complex)
    if center != 0:
        d = fock.displacement(center, dim)
        rho = d @ rho @ d.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def thermal_dim(centers, n_th):
    n_th = float(np.max(np.atleast_1d(n_th)))
    return fock.auto_dim(float(np.max(np.abs(centers) ** 2))) + math.ceil(10 * n_th + 10)


def thermal_constellation(centers, probs, n_th, dim=None, label=""):
    """Mixed constellation of displaced thermal states.

    ``n_th`` is a scalar or one value per state. ``dim`` defaults to the
    coherent rule plus ceil(10 n_th + 10).
    """
    centers = np.asarray(centers, dtype=complex).ravel()
    nth = np.broadcast_to(np.asarray(n_th, dtype=float), centers.shape)
    if dim is None:
        dim = thermal_dim(centers, nth)
    a = fock.annihilation(dim)
    states = [thermal_state(c, n, dim) for c, n in zip(centers, nth)]
    # first moments of the truncated states, so the centre check is self-consistent
    measured = np.array([np.trace(s @ a) for s in states])
    if np.max(np.abs(measured - centers)) > CENTER_TOL:
        raise NonPhysicalError(
            f"dim={dim} too small: displaced states miss their centres by "
            f"{np.max(np.abs(measured - centers)):.2e}"
        )
    return MixedConstellation(tuple(states), probs, measured, label)


def from_coherent(c, dim=None):
    """Pure coherent constellation expressed as displaced vacua."""
    return thermal_constellation(c.points, c.probs, 0.0, dim=dim, label=c.label)


def _povm(mc, rank_tol):
    """POVM elements in the Fock basis and the resolution-of-identity error.

    Built in the eigenbasis of conj(tau), restricted to its support.
    """
    tau_bar = np.conj(sum(pk * s for pk, s in zip(mc.probs, mc.states)))
    lam, vecs = fock.herm_eig(tau_bar)
    if lam[-1] < -fock.PSD_TOL * lam[0]:
        raise NonPhysicalError("average state is not positive semidefinite")
    keep = lam > rank_tol * lam[0]
    u = vecs[:, keep]
    scale = 1.0 / np.sqrt(lam[keep])
    blocks = [pk * (u.conj().T @ np.conj(s) @ u) * np.outer(scale, scale) for pk, s in zip(mc.probs, mc.states)]
    err = float(np.max(np.abs(sum(blocks) - np.eye(u.shape[1]))))
    return tuple(u @ b @ u.conj().T for b in blocks), err


def analyze_mixed(mc, rank_tol=fock.RANK_TOL, max_rank_tol=1e-8):
    """Bound ingredients for a modulation of arbitrary states.

    If an eigenvalue of the average state sits just above ``rank_tol`` the
    inverse square root amplifies round-off past the resolution-of-identity
    tolerance. The cutoff is then raised tenfold, up to ``max_rank_tol``, with
    a warning; the discarded directions carry less than that relative weight.
    """
    dim = mc.dim
    p = mc.probs
    tol = rank_tol
    while True:
        P, resolution_err = _povm(mc, tol)
        if resolution_err <= RESOLUTION_TOL:
            break
        if tol * 10 > max_rank_tol * (1 + 1e-12):
            raise NonPhysicalError(
                f"POVM elements miss the support projector by {resolution_err:.2e} "
                f"even at rank cutoff {tol:.0e}; increase the truncation dimension"
            )
        tol *= 10
    if tol != rank_tol:
        warnings.warn(
            f"rank cutoff raised from {rank_tol:.0e} to {tol:.0e} to keep the POVM a "
            "resolution of the identity",
            stacklevel=2,
        )
    rank_tol = tol

    tau = sum(pk * st for pk, st in zip(p, mc.states))
    tau_bar = fock.conj_in_fock_basis(tau)
    a = fock.annihilation(dim)
    s, s_pinv = fock.sqrt_and_pinv_sqrt(tau, rank_tol=rank_tol)
    s_bar = fock.conj_in_fock_basis(s)
    a_tau = s @ a @ s_pinv
    a_tau_bar = fock.conj_in_fock_basis(a_tau)
    z = np.array([np.trace(fock.conj_in_fock_basis(st) @ a_tau_bar) for st in mc.states])

    first = np.real(np.trace(tau @ a_tau.conj().T @ a_tau))
    moments_tau = np.array([np.trace(st @ a_tau) for st in mc.states])
    w = float(first - np.sum(p * np.abs(moments_tau) ** 2))
    if w < -1e-10:
        raise NonPhysicalError(f"w = {w:.3e} is negative beyond round-off")
    w = max(w, 0.0)

    # overlaps[k, l] = tr(conj(tau) P_k P_l), a Hermitian matrix with row sums p_k
    tp = [tau_bar @ Pk for Pk in P]
    overlaps = np.array([[np.sum(tpk.T * Pl) for Pl in P] for tpk in tp])
    alpha = mc.centers
    diff = alpha[None, :] - alpha[:, None]
    corr = float(np.real(np.sum(diff * z[:, None] * overlaps)))
    # sum_{k,l} conj(alpha_k) alpha_l tr(conj(tau) P_k P_l), the coefficient produced by B^dag B;
    # as an operator product this is tr(conj(tau) G2 G2^dag)
    g2norm = float(np.real(np.sum(np.conj(alpha)[:, None] * alpha[None, :] * overlaps)))

    G1 = sum(zk * Pk for zk, Pk in zip(z, P))
    G2 = sum(np.conj(ak) * Pk for ak, Pk in zip(alpha, P))
    t1 = np.trace(s_bar @ a @ s_bar @ a.conj().T).real
    return MixedAnalysis(
        tau=tau,
        tau_sqrt=s,
        tau_pinv_sqrt=s_pinv,
        P=P,
        z=z,
        G1=G1,
        G2=G2,
        w=w,
        corr=corr,
        g2norm=g2norm,
        mean_photon=float(np.trace(tau @ a.conj().T @ a).real),
        center_photon=float(np.sum(p * np.abs(alpha) ** 2)),
        t1=float(t1),
        overlaps=overlaps,
        mixed=mc,
    )


def z_interval_mixed(an, stats):
    """Range of tr(rho C) for a modulation of arbitrary states."""
    slack = stats.nB - stats.c2**2 / an.g2norm
    if slack < -1e-9:
        raise NonPhysicalError(f"n_B - c2^2/g2norm = {slack:.3e} < 0")
    slack = max(slack, 0.0)
    if an.w == 0.0 and abs(an.corr) > CORR_TOL:
        raise NonPhysicalError("w = 0 with a nonzero correction term: inconsistent modulation")
    mid = 2.0 * stats.c1 - 2.0 * stats.c2 * an.corr / an.g2norm
    half = 2.0 * math.sqrt(an.w * slack)
    return ZInterval(mid - half, mid + half)


def expected_stats_mixed(an, T, xi):
    """Gaussian-channel statistics for a mixed modulation.

    Each output is centred at sqrt(T) alpha_k; thermal photons of the inputs
    pass through the channel with transmittance T.
    """
    _check_channel(T, xi)
    rt = math.sqrt(T)
    p = an.mixed.probs
    beta = rt * an.mixed.centers
    c1 = float(np.real(np.sum(p * an.z * beta)))
    c2 = float(np.real(np.sum(p * np.conj(an.mixed.centers) * beta)))
    return ChannelStats(c1=c1, c2=c2, nB=T * an.mean_photon + T * xi / 2.0)


def from_json(obj):
    """Build a mixed constellation from a JSON document.

    Thermal form: ``{"centers": [[re, im], ...], "probs": [...], "n_th": x or [...]}``.
    Dense form: ``{"states": [[[[re, im], ...], ...], ...], "probs": [...], "centers": ...}``
    with each state a dim x dim matrix of [re, im] pairs.
    """
    try:
        centers = [complex(re, im) for re, im in obj["centers"]]
        probs = obj["probs"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed mixed constellation document: {exc}") from exc
    label = obj.get("label", "")
    if "states" in obj:
        states = [np.array(s, dtype=float) for s in obj["states"]]
        states = tuple(s[..., 0] + 1j * s[..., 1] for s in states)
        return MixedConstellation(states, probs, centers, label)
    return thermal_constellation(centers, probs, obj.get("n_th", 0.0), dim=obj.get("dim"), label=label)


def load(path):
    with open(path) as fh:
        return from_json(json.load(fh))
