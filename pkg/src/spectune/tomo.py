"""Parallel-beam tomography: phantoms, Radon transform and filtered back-projection.

Geometry conventions
--------------------
An ``N x N`` image has pixel centers at ``x = col - (N-1)/2`` and
``y = (N-1)/2 - row`` (unit pixel pitch, y pointing up).  Angles are measured
from the x-axis and are equispaced on ``[0, pi)``.  The detector has
``S = ceil(N * sqrt(2))`` bins of unit pitch centered on the rotation axis,
so every ray through the image is recorded.

The reconstruction filter is the ramp windowed by a Butterworth low-pass,

    tau(w) = |w| / sqrt(1 + (w / w0)**(2 * order)),

with ``w`` normalized so that 1 is the detector Nyquist frequency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage, sparse

from .errors import InputError

# Nyquist frequency of a unit-pitch detector, in cycles per pixel
NYQUIST = 0.5

# modified (high-contrast) Shepp-Logan ellipses:
# intensity, semi-axis a, semi-axis b, center x, center y, rotation (deg)
SHEPP_LOGAN_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


@dataclass(frozen=True)
class FilterParams:
    """Butterworth order and critical frequency (fraction of Nyquist)."""

    order: float
    cutoff: float

    def __post_init__(self):
        if not (np.isfinite(self.order) and self.order >= 1.0):
            raise InputError(f"filter order must be >= 1, got {self.order}")
        if not (np.isfinite(self.cutoff) and 0.0 < self.cutoff <= 1.0):
            raise InputError(f"critical frequency must lie in (0, 1], got {self.cutoff}")


@dataclass
class Sinogram:
    """Projection data, one row per angle, one column per detector offset."""

    angles: np.ndarray
    offsets: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        self.offsets = np.asarray(self.offsets, dtype=float)
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (len(self.angles), len(self.offsets)):
            raise InputError(
                f"sinogram data {self.data.shape} does not match "
                f"{len(self.angles)} angles x {len(self.offsets)} offsets"
            )
        if np.any(np.diff(self.angles) <= 0):
            raise InputError("angles must be strictly increasing")
        if not np.all(np.isfinite(self.data)):
            raise InputError("sinogram contains non-finite values")

    def same_geometry(self, other):
        return (
            self.data.shape == other.data.shape
            and np.array_equal(self.angles, other.angles)
            and np.array_equal(self.offsets, other.offsets)
        )


def detector_bins(size):
    return int(math.ceil(size * math.sqrt(2.0)))


def detector_offsets(n_bins):
    return np.arange(n_bins, dtype=float) - (n_bins - 1) / 2.0


def projection_angles(num_angles):
    return np.arange(num_angles, dtype=float) * (math.pi / num_angles)


def pixel_coordinates(size):
    """``(x, y)`` coordinate fields of an image, shape ``(size, size)`` each."""
    c = (size - 1) / 2.0
    idx = np.arange(size, dtype=float)
    x = np.broadcast_to(idx[None, :] - c, (size, size))
    y = np.broadcast_to(c - idx[:, None], (size, size))
    return x, y


def shepp_logan(size):
    """Modified Shepp-Logan head phantom sampled at pixel centers, values in [0, 1]."""
    if size < 32:
        raise InputError(f"phantom size must be at least 32, got {size}")
    x, y = pixel_coordinates(size)
    # normalized coordinates, [-1, 1] across the image
    x = x * (2.0 / size)
    y = y * (2.0 / size)
    img = np.zeros((size, size))
    for amp, a, b, x0, y0, phi in SHEPP_LOGAN_ELLIPSES:
        t = math.radians(phi)
        xr = (x - x0) * math.cos(t) + (y - y0) * math.sin(t)
        yr = -(x - x0) * math.sin(t) + (y - y0) * math.cos(t)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += amp
    return np.clip(img, 0.0, 1.0)


@dataclass(frozen=True)
class Sphere:
    """Spherical insert in normalized units (image half-width = 1)."""

    center: tuple
    radius: float
    intensity: float


def jaszczak_inserts(ratio=5.0, background=1.0):
    """Three hot (``ratio`` x background) and three cold (zero) spheres on a ring."""
    radii = (0.12, 0.10, 0.085, 0.07, 0.06, 0.05)
    out = []
    for k, r in enumerate(radii):
        phi = 2.0 * math.pi * k / len(radii)
        level = ratio * background if k % 2 == 0 else 0.0
        out.append(Sphere((0.5 * math.cos(phi), 0.5 * math.sin(phi), 0.0), r, level))
    return out


def slice_z(size, z_slices):
    """Normalized z coordinates of slice centers (same pitch as in-plane)."""
    return (np.arange(z_slices, dtype=float) - (z_slices - 1) / 2.0) * (2.0 / size)


def sphere_phantom(size, z_slices, spheres=(), background=1.0, cylinder_radius=0.9):
    """Cylindrical phantom with spherical inserts, shape ``(z_slices, size, size)``.

    The cylinder axis is z.  Coordinates are normalized so the image spans
    [-1, 1] in x and y; slices are spaced by one pixel pitch.  Sphere values
    replace the background inside each sphere.
    """
    if size < 32:
        raise InputError(f"phantom size must be at least 32, got {size}")
    if z_slices < 1:
        raise InputError("need at least one slice")
    if background < 0:
        raise InputError("background must be nonnegative")
    spheres = [s if isinstance(s, Sphere) else Sphere(*s) for s in spheres]
    for i, s in enumerate(spheres):
        cx, cy, _ = s.center
        if s.radius <= 0:
            raise InputError("sphere radius must be positive")
        if math.hypot(cx, cy) + s.radius > cylinder_radius:
            raise InputError(f"sphere {i} leaves the cylindrical field of view")
        for j in range(i):
            t = spheres[j]
            if math.dist(s.center, t.center) < s.radius + t.radius:
                raise InputError(f"spheres {j} and {i} overlap")
    x, y = pixel_coordinates(size)
    x = x * (2.0 / size)
    y = y * (2.0 / size)
    disk = x ** 2 + y ** 2 <= cylinder_radius ** 2
    vol = np.zeros((z_slices, size, size))
    for k, z in enumerate(slice_z(size, z_slices)):
        sl = np.where(disk, float(background), 0.0)
        for s in spheres:
            cx, cy, cz = s.center
            inside = (x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2 <= s.radius ** 2
            sl[inside] = s.intensity
        vol[k] = sl
    return vol


def radon(image, num_angles=360):
    """Line integrals of a square image along equispaced directions in [0, pi).

    Each ray is sampled with unit step and bilinear interpolation.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise InputError(f"radon needs a square image, got shape {img.shape}")
    if num_angles < 1:
        raise InputError("need at least one projection angle")
    size = img.shape[0]
    n_bins = detector_bins(size)
    offsets = detector_offsets(n_bins)
    angles = projection_angles(num_angles)
    c = (size - 1) / 2.0
    s = offsets[None, :]
    t = offsets[:, None]
    data = np.empty((num_angles, n_bins))
    for i, th in enumerate(angles):
        cos, sin = math.cos(th), math.sin(th)
        x = s * cos - t * sin
        y = s * sin + t * cos
        samples = ndimage.map_coordinates(img, [c - y, x + c], order=1, mode="constant", cval=0.0)
        data[i] = samples.sum(axis=0)
    return Sinogram(angles, offsets, data)


def radon_volume(volume, num_angles=360):
    return [radon(sl, num_angles) for sl in np.asarray(volume, dtype=float)]


def butterworth_ramp(params, frequencies):
    """Ramp times Butterworth magnitude at normalized frequencies (1 = Nyquist)."""
    w = np.abs(np.asarray(frequencies, dtype=float))
    with np.errstate(over="ignore"):
        roll = (w / params.cutoff) ** (2.0 * params.order)
    return w / np.sqrt(1.0 + roll)


def padded_length(n_bins):
    """Smallest power of two that is at least twice the detector length."""
    return 1 << int(math.ceil(math.log2(2 * n_bins)))


def frequency_response(params, n_bins):
    """Filter samples on the FFT bins of the zero-padded detector row.

    The normalized ramp is converted to cycles per pixel (times
    :data:`NYQUIST`) so that back-projection is quantitatively consistent.
    """
    P = padded_length(n_bins)
    w = np.abs(np.fft.fftfreq(P)) / NYQUIST
    return butterworth_ramp(params, w) * NYQUIST


def filter_sinogram(sino, params):
    """Apply the Butterworth-ramp filter to every projection row."""
    S = sino.data.shape[1]
    P = padded_length(S)
    H = frequency_response(params, S)
    spec = np.fft.fft(sino.data, n=P, axis=1) * H
    out = np.fft.ifft(spec, axis=1)
    peak = np.abs(out.real).max(initial=0.0)
    residue = np.abs(out.imag).max(initial=0.0)
    if residue > 1e-9 * max(peak, 1e-300) and residue > 1e-300:
        raise ArithmeticError(f"filtered projections have imaginary residue {residue:.3e}")
    return Sinogram(sino.angles, sino.offsets, out.real[:, :S].copy())


# largest back-projection operator (stored entries) kept as a cached sparse matrix
SPARSE_BP_LIMIT = 4_000_000


def back_project(sino, size):
    """Smear each projection back along its rays and integrate over angle.

    Uses linear interpolation in the offset direction and the Riemann weight
    ``pi / num_angles``; offsets outside the detector contribute zero.
    """
    if size < 1:
        raise InputError("image size must be positive")
    n_angles, n_bins = sino.data.shape
    if 2 * size * size * n_angles <= SPARSE_BP_LIMIT:
        op = _bp_operator(sino.angles.tobytes(), sino.offsets.tobytes(), size)
        return (op @ sino.data.ravel()).reshape(size, size)
    x, y = pixel_coordinates(size)
    img = np.zeros((size, size))
    for th, row in zip(sino.angles, sino.data):
        s = x * math.cos(th) + y * math.sin(th)
        img += np.interp(s, sino.offsets, row, left=0.0, right=0.0)
    return img * (math.pi / n_angles)


@lru_cache(maxsize=8)
def _bp_operator(angles_buf, offsets_buf, size):
    """Back-projection as a CSR matrix mapping flattened sinograms to images."""
    angles = np.frombuffer(angles_buf)
    offsets = np.frombuffer(offsets_buf)
    n_bins = len(offsets)
    x, y = pixel_coordinates(size)
    x, y = x.ravel(), y.ravel()
    pix = np.arange(size * size)
    rows, cols, vals = [], [], []
    for a, th in enumerate(angles):
        s = x * math.cos(th) + y * math.sin(th)
        # same rule as np.interp: linear between neighbours, zero outside
        inside = (s >= offsets[0]) & (s <= offsets[-1])
        j = np.clip(np.searchsorted(offsets, s, side="right") - 1, 0, n_bins - 2)
        frac = (s - offsets[j]) / (offsets[j + 1] - offsets[j])
        for k, w in ((j, 1.0 - frac), (j + 1, frac)):
            rows.append(pix[inside])
            cols.append(a * n_bins + k[inside])
            vals.append(w[inside])
    op = sparse.csr_matrix(
        (np.concatenate(vals) * (math.pi / len(angles)), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size * size, len(angles) * n_bins),
    )
    op.sum_duplicates()
    return op


def fbp(sino, params, size):
    """Filtered back-projection of one sinogram."""
    return back_project(filter_sinogram(sino, params), size)


def fbp_volume(sinos, params, size):
    """Slice-wise FBP, shape ``(len(sinos), size, size)``."""
    sinos = list(sinos)
    if not sinos:
        raise InputError("no sinograms given")
    for k, s in enumerate(sinos[1:], 1):
        if not s.same_geometry(sinos[0]):
            raise InputError(f"slice {k} has a different projection geometry than slice 0")
    return np.stack([fbp(s, params, size) for s in sinos])


def add_poisson_noise(sino, counts, rng):
    """Poisson-resample projections so the peak bin holds ``counts`` events."""
    if counts <= 0:
        raise InputError("counts must be positive")
    peak = sino.data.max()
    if peak <= 0:
        return Sinogram(sino.angles, sino.offsets, sino.data.copy())
    scale = counts / peak
    noisy = rng.poisson(np.clip(sino.data, 0.0, None) * scale) / scale
    return Sinogram(sino.angles, sino.offsets, noisy)
