"""Synthetic scenes with scaling variability and two-stage Gaussian noise.

Endmembers are smooth Gaussian-bump spectra.  Abundances come from
smoothed white-noise fields passed through a per-pixel softmax.  Every
pixel mixes its own copy of the endmembers, each scaled by a factor drawn
from ``[scale_min, scale_max]`` and perturbed by white noise, before a
second round of white noise is added to the mixed image.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .model import AbundanceMatrix, ContractError, EndmemberDictionary, HyperspectralImage

MIN_ANGLE = 0.1
CHUNK = 4096


@dataclass(frozen=True)
class SceneSpec:
    rows: int = 200
    cols: int = 200
    num_bands: int = 224
    num_endmembers: int = 5
    scale_min: float = 0.75
    scale_max: float = 1.25
    snr_db: float = 25.0
    smoothness: float = 10.0
    rng_seed: int = 0
    # one scale per pixel shared by all endmembers
    shared_scale: bool = False
    # 0 = white Gaussian noise; 1-3 = Gaussian mixture with that many components
    noise_mixture: int = 0
    # gain applied to the standardized fields before the softmax
    contrast: float = 2.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ContractError("rows and cols must be positive")
        if not 1 <= self.num_endmembers <= self.num_bands:
            raise ContractError("need 1 <= num_endmembers <= num_bands")
        if not 0 < self.scale_min <= self.scale_max:
            raise ContractError("need 0 < scale_min <= scale_max")
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ContractError("snr_db must be a number or +inf")
        if self.smoothness < 0:
            raise ContractError("smoothness must be nonnegative")
        if self.noise_mixture not in (0, 1, 2, 3):
            raise ContractError("noise_mixture must be 0, 1, 2 or 3")

    @property
    def num_pixels(self):
        return self.rows * self.cols

    def to_dict(self):
        d = asdict(self)
        if math.isinf(d["snr_db"]):
            d["snr_db"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if isinstance(d.get("snr_db"), str):
            d["snr_db"] = float(d["snr_db"])
        return cls(**d)


@dataclass
class Scene:
    image: HyperspectralImage
    abundances: AbundanceMatrix
    endmembers: EndmemberDictionary
    scales: np.ndarray  # P x N per-pixel, per-endmember factors
    spec: SceneSpec


def _streams(seed):
    """Independent generators for each stage, so that stages do not shift one another."""
    ss = np.random.SeedSequence(int(seed))
    return [np.random.default_rng(s) for s in ss.spawn(5)]


def _angle(a, b):
    c = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
    return math.acos(min(1.0, max(-1.0, c)))


def generate_endmembers(spec: SceneSpec, rng=None) -> EndmemberDictionary:
    """Smooth nonnegative spectra with pairwise angles of at least 0.1 rad."""
    rng = rng if rng is not None else _streams(spec.rng_seed)[0]
    D = spec.num_bands
    grid = np.arange(D, dtype=float)
    cols = []
    attempts = 0
    while len(cols) < spec.num_endmembers:
        attempts += 1
        if attempts > 1000:
            raise RuntimeError("could not draw sufficiently distinct endmembers")
        k = rng.integers(3, 7)
        centers = rng.uniform(-0.1 * D, 1.1 * D, k)
        widths = rng.uniform(0.04 * D, 0.25 * D, k)
        amps = rng.uniform(0.2, 1.0, k)
        s = np.sum(amps[:, None] * np.exp(-0.5 * ((grid - centers[:, None]) / widths[:, None]) ** 2), axis=0)
        s = s / s.max() * rng.uniform(0.5, 1.0)
        if all(_angle(s, c) >= MIN_ANGLE for c in cols):
            cols.append(s)
    return EndmemberDictionary(np.column_stack(cols))


def generate_abundances(spec: SceneSpec, rng=None) -> AbundanceMatrix:
    """Softmax of smoothed Gaussian fields, one field per endmember."""
    rng = rng if rng is not None else _streams(spec.rng_seed)[1]
    P = spec.num_endmembers
    fields = rng.standard_normal((P, spec.rows, spec.cols))
    if spec.smoothness > 0:
        fields = np.stack([gaussian_filter(f, spec.smoothness, mode="wrap") for f in fields])
    flat = fields.reshape(P, -1)
    std = flat.std(axis=1, keepdims=True)
    flat = (flat - flat.mean(axis=1, keepdims=True)) / np.where(std > 0, std, 1.0)
    z = spec.contrast * flat
    z = np.exp(z - z.max(axis=0))
    X = z / z.sum(axis=0)
    return AbundanceMatrix(X, asc_normalized=True)


def noise_sigma(power: float, snr_db: float) -> float:
    """Standard deviation giving ``snr_db`` for a signal of mean square ``power``."""
    return math.sqrt(power / 10 ** (snr_db / 10))


def add_noise_snr(M, snr_db, rng) -> np.ndarray:
    """Add white Gaussian noise at the requested SNR (``inf`` adds nothing)."""
    M = np.asarray(M, dtype=np.float64)
    if snr_db is None or snr_db == math.inf:
        return M.copy()
    power = float(np.sum(M * M)) / M.size
    if power == 0:
        raise ContractError("SNR is undefined for an all-zero signal")
    return M + rng.normal(0.0, noise_sigma(power, snr_db), M.shape)


def mixture_noise(shape, n_components, rng) -> np.ndarray:
    """Gaussian-mixture noise; means and variances drawn from ``[0, 0.01]``.

    Each entry picks one of ``n_components`` Gaussians with equal probability.
    """
    means = rng.uniform(0.0, 0.01, n_components)
    variances = rng.uniform(0.0, 0.01, n_components)
    pick = rng.integers(0, n_components, size=shape)
    return rng.standard_normal(shape) * np.sqrt(variances)[pick] + means[pick]


def _stage_noise(shape, sigma, spec, rng):
    if spec.noise_mixture:
        return mixture_noise(shape, spec.noise_mixture, rng)
    return rng.normal(0.0, sigma, shape)


def generate_scene(spec: SceneSpec) -> Scene:
    """Build an image, ground-truth abundances, endmembers and the scale field."""
    r_em, r_ab, r_sc, r_n1, r_n2 = _streams(spec.rng_seed)
    A = generate_endmembers(spec, r_em).data
    X = generate_abundances(spec, r_ab).data
    D, P = A.shape
    N = spec.num_pixels
    if spec.shared_scale:
        c = np.repeat(r_sc.uniform(spec.scale_min, spec.scale_max, (1, N)), P, axis=0)
    else:
        c = r_sc.uniform(spec.scale_min, spec.scale_max, (P, N))

    # clean mixture of the scaled signatures
    Y = A @ (c * X)
    noisy = spec.noise_mixture or spec.snr_db != math.inf
    if noisy:
        # mean square of the stacked per-pixel scaled signatures c_kp * a_p
        power = float(np.sum((c ** 2).sum(axis=1) * (A ** 2).sum(axis=0))) / (N * P * D)
        sigma1 = noise_sigma(power, spec.snr_db) if spec.snr_db != math.inf else 0.0
        for start in range(0, N, CHUNK):
            stop = min(N, start + CHUNK)
            n = _stage_noise((stop - start, D, P), sigma1, spec, r_n1)
            Y[:, start:stop] += np.einsum("kdp,pk->dk", n, X[:, start:stop])
        if spec.noise_mixture:
            Y = Y + mixture_noise(Y.shape, spec.noise_mixture, r_n2)
        else:
            Y = add_noise_snr(Y, spec.snr_db, r_n2)
    image = HyperspectralImage(Y, shape2d=(spec.rows, spec.cols))
    return Scene(image, AbundanceMatrix(X, asc_normalized=True), EndmemberDictionary(A), c, spec)
