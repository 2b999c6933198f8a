"""Dense linear algebra on a single-mode truncated Fock space.

Vectors and operators are plain numpy arrays indexed by photon number.
Nothing here mutates its inputs.
"""

import math
import warnings
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from .errors import NonPhysicalError

HERM_TOL = 1e-10
RANK_TOL = 1e-10
PSD_TOL = 1e-10


class EigDecomposition(NamedTuple):
    """Eigenvalues in descending order and matching orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def auto_dim(max_photon, extra=0):
    """Truncation dimension that keeps coherent-state tails below ~1e-12.

    ``max_photon`` is the largest |alpha|^2 that must be represented.
    """
    max_photon = float(max_photon)
    if not math.isfinite(max_photon) or max_photon < 0:
        raise ValueError(f"max_photon must be finite and >= 0, got {max_photon}")
    return int(math.ceil(max_photon + 10.0 * math.sqrt(max_photon + 1.0) + 25.0)) + int(extra)


def coherent_vector(alpha, dim):
    """Fock amplitudes of the coherent state |alpha>, truncated to ``dim`` levels.

    The vector is not renormalised; ``tail_mass`` gives the discarded weight.
    """
    return coherent_matrix([alpha], dim)[:, 0]


def coherent_matrix(alphas, dim):
    """Columns are truncated coherent vectors, one per entry of ``alphas``."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    alphas = np.asarray(alphas, dtype=complex).ravel()
    if not np.all(np.isfinite(alphas)):
        raise ValueError("coherent amplitudes must be finite")
    n = np.arange(dim)[:, None]
    r = np.abs(alphas)[None, :]
    # log-magnitude avoids overflow of alpha^n / sqrt(n!) at large n
    with np.errstate(divide="ignore", invalid="ignore"):
        logmag = n * np.log(r) - 0.5 * gammaln(n + 1) - 0.5 * r**2
    logmag = np.where(r == 0, np.where(n == 0, 0.0, -np.inf), logmag)
    phase = np.exp(1j * n * np.angle(alphas)[None, :])
    return np.exp(logmag) * phase


def tail_mass(v):
    """Probability weight lost to truncation, 1 - ||v||^2 (clipped at 0)."""
    v = np.asarray(v)
    return max(0.0, 1.0 - float(np.vdot(v, v).real))


def fock_vector(n, dim):
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return v


def annihilation(dim):
    """Truncated annihilation operator with a[n-1, n] = sqrt(n)."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def number_operator(dim):
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def is_hermitian(m, tol=HERM_TOL):
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol * scale)


def herm_eig(m, tol=HERM_TOL):
    """Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not is_hermitian(m, tol):
        raise ValueError("matrix is not Hermitian within tolerance")
    try:
        lam, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"Hermitian eigensolver did not converge: {exc}") from exc
    return EigDecomposition(lam[::-1].copy(), vecs[:, ::-1].copy())


def sqrt_and_pinv_sqrt(m, rank_tol=RANK_TOL, psd_tol=PSD_TOL):
    """Return (M^{1/2}, pinv(M)^{1/2}) for a Hermitian PSD matrix.

    Eigenvalues at or below ``rank_tol * lambda_max`` are treated as zero for
    both outputs. Slightly negative eigenvalues (above ``-psd_tol *
    lambda_max``) are round-off and get clipped; anything lower raises
    :class:`NonPhysicalError`.
    """
    lam, vecs = herm_eig(m)
    lam_max = lam[0] if lam.size else 0.0
    if lam_max <= 0:
        if lam.size and lam[-1] < -psd_tol * max(abs(lam[-1]), 1.0):
            raise NonPhysicalError("matrix has no positive spectrum")
        z = np.zeros_like(m, dtype=complex)
        return z, z.copy()
    if lam[-1] < -psd_tol * lam_max:
        raise NonPhysicalError(
            f"eigenvalue {lam[-1]:.3e} below -{psd_tol:g} * lambda_max; input is not PSD"
        )
    keep = lam > rank_tol * lam_max
    root = np.where(keep, np.sqrt(np.clip(lam, 0.0, None)), 0.0)
    inv_root = np.zeros_like(lam)
    inv_root[keep] = 1.0 / np.sqrt(lam[keep])
    s = (vecs * root) @ vecs.conj().T
    s_pinv = (vecs * inv_root) @ vecs.conj().T
    return s, s_pinv


def support_projector(m, rank_tol=RANK_TOL):
    lam, vecs = herm_eig(m)
    if not lam.size or lam[0] <= 0:
        return np.zeros_like(m, dtype=complex)
    u = vecs[:, lam > rank_tol * lam[0]]
    return u @ u.conj().T


def conj_in_fock_basis(m):
    """Entrywise complex conjugate (the operator conjugated in the Fock basis)."""
    return np.conj(m)


def displacement(alpha, dim):
    """Truncated displacement operator exp(alpha a^dag - conj(alpha) a).

    Built from the eigendecomposition of the Hermitian matrix i*(generator),
    so the result is exactly unitary on the truncated space. Only the
    low-photon block is faithful to the untruncated operator.
    """
    alpha = complex(alpha)
    if not (math.isfinite(alpha.real) and math.isfinite(alpha.imag)):
        raise ValueError("displacement amplitude must be finite")
    if abs(alpha) ** 2 > dim / 4:
        warnings.warn(
            f"|alpha|^2 = {abs(alpha) ** 2:.3g} is not small against dim = {dim}; "
            "truncated displacement will be inaccurate",
            stacklevel=2,
        )
    a = annihilation(dim)
    gen = alpha * a.conj().T - np.conj(alpha) * a
    lam, vecs = np.linalg.eigh(1j * gen)
    # gen = -i * (i gen), so exp(gen) = V exp(-i lam) V^dag
    return (vecs * np.exp(-1j * lam)) @ vecs.conj().T


def thermal_diag(n_th, dim):
    """Diagonal of a centred thermal state with mean photon number ``n_th``."""
    if n_th < 0:
        raise ValueError(f"n_th must be >= 0, got {n_th}")
    if n_th == 0:
        d = np.zeros(dim)
        d[0] = 1.0
        return d
    q = n_th / (1.0 + n_th)
    return (1.0 - q) * q ** np.arange(dim)
