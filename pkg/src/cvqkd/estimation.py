"""Monte-Carlo heterodyne data and the parameter-estimation statistics built from it.

Noise convention: b = (x + i p) / 2 with [x, p] = 2i, so a heterodyne outcome
is beta = sqrt(T) alpha + gamma with E|gamma|^2 = 1 + T xi / 2. With this
choice the sample estimators converge to :func:`bound.expected_stats`.
"""

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .bound import ChannelStats, _check_channel


@dataclass(frozen=True)
class SampleBatch:
    indices: np.ndarray
    outcomes: np.ndarray
    seed: int

    def __post_init__(self):
        if self.indices.shape != self.outcomes.shape:
            raise ValueError("indices and outcomes must have equal length")

    @property
    def n(self):
        return self.indices.size


@dataclass(frozen=True)
class WorstCaseStats:
    c1_min: float
    c2_min: float
    nB_max: float
    eps_pe: float
    kappa: float

    def as_stats(self):
        return ChannelStats(self.c1_min, self.c2_min, self.nB_max)


def rng(seed, stream=0):
    """PCG64 generator for (seed, stream); distinct streams are independent."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream)])))


def sample_channel(c, T, xi, n, seed, stream=0):
    """Draw n (index, outcome) pairs from constellation ``c`` through a Gaussian channel."""
    _check_channel(T, xi)
    if n < 1:
        raise ValueError(f"need n >= 1 samples, got {n}")
    gen = rng(seed, stream)
    idx = gen.choice(len(c), size=int(n), p=c.probs)
    sigma = math.sqrt((1.0 + T * xi / 2.0) / 2.0)
    noise = gen.normal(0.0, sigma, size=(2, int(n)))
    beta = math.sqrt(T) * c.points[idx] + noise[0] + 1j * noise[1]
    return SampleBatch(idx, beta, int(seed))


def sample_channel_split(c, T, xi, n, seed, chunks):
    """Same distribution as :func:`sample_channel`, drawn as ``chunks`` independent sub-streams."""
    sizes = [n // chunks + (1 if i < n % chunks else 0) for i in range(chunks)]
    parts = [sample_channel(c, T, xi, s, seed, stream=i + 1) for i, s in enumerate(sizes) if s]
    return SampleBatch(
        np.concatenate([p.indices for p in parts]),
        np.concatenate([p.outcomes for p in parts]),
        int(seed),
    )


def per_state_means(batch, size):
    """Mean outcome per constellation index; NaN where a point was never sent."""
    if batch.n and (batch.indices.min() < 0 or batch.indices.max() >= size):
        raise ValueError("batch indices fall outside the constellation")
    counts = np.bincount(batch.indices, minlength=size)
    sums = np.bincount(batch.indices, weights=batch.outcomes.real, minlength=size) + 1j * np.bincount(
        batch.indices, weights=batch.outcomes.imag, minlength=size
    )
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts
    return means, counts


def empirical_stats(batch, an):
    """Observed (c1, c2, n_B) for a coherent-state analysis.

    Points with no samples contribute zero (with a warning).
    """
    c = an.constellation
    if c is None or an.alpha_tau is None:
        raise ValueError("empirical statistics need a Fock-space analysis of a finite constellation")
    means, counts = per_state_means(batch, len(c))
    missing = counts == 0
    if np.any(missing):
        warnings.warn(
            f"{int(missing.sum())} constellation points received no samples; "
            "their terms are set to zero",
            stacklevel=2,
        )
        means = np.where(missing, 0.0, means)
    c1 = float(np.real(np.sum(c.probs * np.conj(an.alpha_tau) * means)))
    c2 = float(np.real(np.sum(c.probs * np.conj(c.points) * means)))
    nB = float(np.mean(np.abs(batch.outcomes) ** 2) - 1.0)
    return ChannelStats(c1, c2, nB)


def worst_case(obs, n, eps_pe, kappa):
    """Pessimistic statistics at finite sample size n.

    ``kappa`` stands in for the unknown constant of the O(sqrt(log(1/eps)/n))
    fluctuation term; it has no default on purpose.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 < eps_pe < 1:
        raise ValueError(f"eps_pe must lie in (0, 1), got {eps_pe}")
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    delta = kappa * math.sqrt(math.log(1.0 / eps_pe) / n)
    return WorstCaseStats(
        c1_min=obs.c1 - obs.nB * delta,
        c2_min=obs.c2 - obs.nB * delta,
        nB_max=obs.nB * (1.0 + delta),
        eps_pe=eps_pe,
        kappa=kappa,
    )


def write_batch_csv(batch, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["k", "re_beta", "im_beta"])
        for k, b in zip(batch.indices, batch.outcomes):
            out.writerow([int(k), f"{b.real:.17g}", f"{b.imag:.17g}"])


def read_batch_csv(path, seed=0):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return SampleBatch(data[:, 0].astype(int), data[:, 1] + 1j * data[:, 2], seed)
