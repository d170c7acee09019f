"""No-reference perception-based image quality score (PIQUE).

Pipeline for one grayscale image:

1. min-max rescale luminance to [0, 255];
2. MSCN coefficients ``(I - mu) / (sigma + C)`` with ``mu``/``sigma`` the
   Gaussian-weighted local mean and deviation (7x7 window, sigma = 1 px);
3. tile non-overlapping ``n x n`` blocks, skipping the outer frame of width
   ``2K + 1`` and any partial block;
4. blocks whose MSCN variance reaches ``T_U`` are spatially active (SA);
   each SA block is tested for a noticeable-distortion edge segment and for
   center-surround noise, and scored in [0, 1];
5. score = 100 * (sum of block scores + C) / (number of SA blocks + C).

Lower is better.  An image without SA blocks scores 100.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InputError


@dataclass(frozen=True)
class PiqueConfig:
    block_size: int = 16
    segment_length: int = 6
    uniform_threshold: float = 0.1
    segment_std_threshold: float = 0.1
    mscn_stability: float = 1.0
    score_stability: float = 1.0
    window_half_extent: int = 3

    def __post_init__(self):
        if self.block_size < 4:
            raise InputError(f"block size must be at least 4, got {self.block_size}")
        if not 1 <= self.segment_length < self.block_size:
            raise InputError(
                f"segment length must lie in [1, {self.block_size}), got {self.segment_length}"
            )
        if self.window_half_extent < 1:
            raise InputError("window half extent must be at least 1")
        for name in ("uniform_threshold", "segment_std_threshold", "mscn_stability", "score_stability"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")

    @property
    def frame(self):
        """Width of the excluded image border."""
        return 2 * self.window_half_extent + 1


@dataclass(frozen=True)
class BlockAnalysis:
    row: int
    col: int
    variance: float
    active: bool
    distorted: bool = False
    noisy: bool = False
    score: float = 0.0

    @property
    def label(self):
        return "SA" if self.active else "U"


def gaussian_window(half_extent=3):
    """Circular Gaussian weights on ``(2K+1)^2`` nodes, cut at three sigma, unit sum."""
    if half_extent < 1:
        raise InputError("half extent must be at least 1")
    sigma = half_extent / 3.0
    k = np.arange(-half_extent, half_extent + 1, dtype=float)
    w = np.exp(-(k[:, None] ** 2 + k[None, :] ** 2) / (2.0 * sigma ** 2))
    return w / w.sum()


def normalize_luminance(image):
    """Affine min-max map to [0, 255]; a constant image maps to zeros."""
    img = np.asarray(image, dtype=float)
    lo, hi = img.min(), img.max()
    if hi == lo:
        return np.zeros_like(img)
    return (img - lo) * (255.0 / (hi - lo))


def _check_image(image, config):
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise InputError(f"expected a 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise InputError("image contains non-finite values")
    w = 2 * config.window_half_extent + 1
    if min(img.shape) < w:
        raise InputError(f"image {img.shape} is smaller than the {w}x{w} window")
    return img


def local_statistics(image, config=PiqueConfig()):
    """Gaussian-weighted local mean and deviation fields (mirror boundaries)."""
    img = _check_image(image, config)
    w = gaussian_window(config.window_half_extent)
    mu = ndimage.correlate(img, w, mode="mirror")
    second = ndimage.correlate(img * img, w, mode="mirror")
    sigma = np.sqrt(np.maximum(second - mu * mu, 0.0))
    return mu, sigma


def mscn(image, config=PiqueConfig()):
    """Mean-subtracted contrast-normalized coefficients of ``image``.

    The luminance is used as given; :func:`pique_score` rescales it first.
    """
    img = _check_image(image, config)
    # shifting by the minimum keeps flat regions exactly zero after filtering
    img = img - img.min()
    mu, sigma = local_statistics(img, config)
    return (img - mu) / (sigma + config.mscn_stability)


def block_variance(block):
    """Population variance (divide by n^2) of a block."""
    b = np.asarray(block, dtype=float)
    return float(np.mean((b - b.mean()) ** 2))


def edge_segments(block, segment_length):
    """All edge segments of a block as a ``(4 * (n - m), m)`` array.

    Edges are the first row, last row, first column and last column; each
    contributes the segments starting at offsets ``0 .. n - m - 1``.
    """
    b = np.asarray(block, dtype=float)
    n = b.shape[0]
    m = segment_length
    edges = (b[0, :], b[-1, :], b[:, 0], b[:, -1])
    starts = range(n - m)
    return np.array([e[q:q + m] for e in edges for q in starts]).reshape(-1, m)


def noticeable_distortion(block, segment_length, std_threshold):
    """True when some edge segment has (population) std below the threshold."""
    b = np.asarray(block, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise InputError(f"expected a square block, got shape {b.shape}")
    if segment_length > b.shape[0]:
        raise InputError("segment longer than the block edge")
    seg = edge_segments(b, segment_length)
    if len(seg) == 0:
        return False
    return bool(np.any(seg.std(axis=1) < std_threshold))


def center_surround(block):
    """Standard deviations of the two central columns and of the other columns."""
    b = np.asarray(block, dtype=float)
    n = b.shape[1]
    c = (n // 2 - 1, n // 2)
    center = b[:, list(c)]
    surround = np.delete(b, c, axis=1)
    return float(center.std()), float(surround.std())


def noise_criterion(block):
    """Center-surround white-noise test: ``sigma_k > 2 * beta``.

    Undefined ratios (flat surround, or both terms zero) count as not noisy.
    """
    b = np.asarray(block, dtype=float)
    if b.ndim != 2 or min(b.shape) < 4:
        raise InputError(f"noise criterion needs a block of at least 4x4, got {b.shape}")
    sigma_k = float(np.sqrt(block_variance(b)))
    sd_cen, sd_sur = center_surround(b)
    if sd_sur == 0.0:
        return False
    ratio = sd_cen / sd_sur
    denom = max(ratio, sigma_k)
    if denom == 0.0:
        return False
    beta = abs(ratio - sigma_k) / denom
    return bool(sigma_k > 2.0 * beta)


def block_score(distorted, noisy, nu_k):
    """Per-block distortion score in [0, 1]."""
    if nu_k < 0:
        raise InputError(f"block variance must be nonnegative, got {nu_k}")
    nu = min(float(nu_k), 1.0)
    if distorted and noisy:
        return 1.0
    if noisy:
        return nu
    if distorted:
        return 1.0 - nu
    return 0.0


def block_origins(shape, config=PiqueConfig()):
    """Top-left corners of the analyzed blocks for an image of ``shape``."""
    f, n = config.frame, config.block_size
    rows = range(f, shape[0] - f - n + 1, n)
    cols = range(f, shape[1] - f - n + 1, n)
    return [(r, c) for r in rows for c in cols]


def analyze_blocks(image, config=PiqueConfig()):
    """Label and score every analyzed block of ``image``."""
    img = _check_image(image, config)
    coeffs = mscn(normalize_luminance(img), config)
    n = config.block_size
    out = []
    for r, c in block_origins(img.shape, config):
        blk = coeffs[r:r + n, c:c + n]
        nu = block_variance(blk)
        if nu < config.uniform_threshold:
            out.append(BlockAnalysis(r, c, nu, active=False))
            continue
        dist = noticeable_distortion(blk, config.segment_length, config.segment_std_threshold)
        noisy = noise_criterion(blk)
        out.append(BlockAnalysis(r, c, nu, True, dist, noisy, block_score(dist, noisy, nu)))
    return out


def pique_score(image, config=PiqueConfig()):
    """PIQUE score of a 2-D image on the 0-100 scale (lower is better)."""
    blocks = analyze_blocks(image, config)
    if not blocks:
        raise InputError(
            f"image {np.shape(image)} has no complete {config.block_size}x{config.block_size} "
            f"block inside the {config.frame}-pixel border"
        )
    active = [b for b in blocks if b.active]
    total = sum(b.score for b in active)
    C = config.score_stability
    return 100.0 * (total + C) / (len(active) + C)
