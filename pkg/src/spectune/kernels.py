"""Positive definite kernels, kernel interpolation and the power function.

Two radial kernels are provided, both with unit diagonal:

    gaussian   k(x, y) = exp(-(eps * |x - y|)**2)
    matern     k(x, y) = exp(-eps * |x - y|)

Point sets are ``(n, d)`` arrays; a 1-D array passed where a *set* of points
is expected is read as ``n`` points in one dimension.  A 1-D array passed
where a *single* point is expected is read as one ``d``-dimensional point.

Linear systems are solved through a Cholesky factor.  When the factorization
fails, a small ladder of diagonal shifts is tried before giving up with a
:class:`~spectune.errors.ConditioningError`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist, pdist

from .errors import ConditioningError, InputError

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)
# radicands of the power function above this (negative) value are rounding noise
RADICAND_FLOOR = -1e-10

FAMILIES = ("gaussian", "matern")


@dataclass(frozen=True)
class Kernel:
    """Radial kernel with shape parameter ``epsilon``.

    Calling the kernel on two point sets returns the ``(n, m)`` matrix of
    pairwise values.
    """

    family: str = "matern"
    epsilon: float = 0.1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if not np.isfinite(self.epsilon) or self.epsilon <= 0:
            raise InputError(f"epsilon must be a positive finite number, got {self.epsilon}")

    def from_distance(self, r):
        r = np.asarray(r, dtype=float)
        if self.family == "gaussian":
            return np.exp(-((self.epsilon * r) ** 2))
        return np.exp(-self.epsilon * r)

    def __call__(self, x, y):
        x = as_sites(x)
        y = as_sites(y)
        _check_dims(x, y)
        return self.from_distance(cdist(x, y))


@dataclass(frozen=True)
class Interpolant:
    """Kernel expansion ``f(x) = sum_i c_i k(x, x_i)``."""

    kernel: Kernel
    centers: np.ndarray
    coefficients: np.ndarray
    jitter: float = field(default=0.0, compare=False)

    def __post_init__(self):
        centers = as_sites(self.centers)
        coefficients = np.asarray(self.coefficients, dtype=float).reshape(-1)
        if len(centers) != len(coefficients):
            raise InputError(
                f"{len(centers)} centers but {len(coefficients)} coefficients"
            )
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def dim(self):
        return self.centers.shape[1]

    def __call__(self, query):
        """Evaluate at one point (returns a float) or at an ``(m, d)`` set."""
        q, single = as_query(query, self.dim)
        _check_dims(q, self.centers)
        if len(self.centers) == 0:
            out = np.zeros(len(q))
        else:
            out = self.kernel(q, self.centers) @ self.coefficients
        return float(out[0]) if single else out


def as_sites(points):
    """Return ``points`` as a float ``(n, d)`` array."""
    a = np.asarray(points, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a[:, None]
    elif a.ndim != 2:
        raise InputError(f"expected a (n, d) point set, got shape {a.shape}")
    return a


def as_point(point):
    """Return a single point as a float ``(d,)`` array."""
    a = np.atleast_1d(np.asarray(point, dtype=float))
    if a.ndim != 1:
        raise InputError(f"expected a single point, got shape {a.shape}")
    return a


def as_query(query, dim):
    """Normalize a query against a ``dim``-dimensional model.

    Returns ``(points, single)``: a scalar, or a 1-D array of length ``dim``
    when ``dim > 1``, is a single point; anything else is a point set.
    """
    a = np.asarray(query, dtype=float)
    if a.ndim == 0 or (a.ndim == 1 and dim > 1):
        return as_point(a)[None, :], True
    return as_sites(a), False


def _check_dims(x, y):
    if x.shape[1] != y.shape[1]:
        raise InputError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")


def eval_kernel(kernel, x, y):
    """Kernel value between two single points."""
    x = as_point(x)
    y = as_point(y)
    if x.shape != y.shape:
        raise InputError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return float(kernel.from_distance(np.linalg.norm(x - y)))


def check_distinct(sites):
    sites = as_sites(sites)
    if len(sites) > 1 and pdist(sites).min() == 0.0:
        raise InputError("sites must be pairwise distinct")
    return sites


def kernel_matrix(kernel, sites):
    """Symmetric kernel matrix ``K[i, j] = k(x_i, x_j)`` of distinct sites."""
    sites = check_distinct(sites)
    K = kernel(sites, sites)
    # enforce exact symmetry and unit diagonal against cdist rounding
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0)
    return K


def cholesky(matrix, jitter=0.0):
    """Lower Cholesky factor of ``matrix + s I`` for the first workable shift.

    Shifts tried are ``jitter`` followed by the entries of
    :data:`JITTER_LADDER` that exceed it.  Returns ``(L, s)``.
    """
    matrix = np.asarray(matrix, dtype=float)
    n = len(matrix)
    if n == 0:
        return np.zeros((0, 0)), float(jitter)
    shifts = [float(jitter)] + [s for s in JITTER_LADDER if s > jitter]
    for s in shifts:
        try:
            L = linalg.cholesky(matrix + s * np.eye(n), lower=True, check_finite=True)
        except (linalg.LinAlgError, ValueError):
            continue
        if np.all(np.isfinite(L)) and np.all(np.diag(L) > 0):
            return L, s
    try:
        cond = float(np.linalg.cond(matrix))
    except np.linalg.LinAlgError:
        cond = float("inf")
    raise ConditioningError(
        f"kernel matrix not factorizable even with diagonal shift {shifts[-1]:g} "
        f"(condition number ~{cond:.3g})",
        condition_number=cond,
    )


def fit_interpolant(kernel, sites, values, jitter=0.0):
    """Solve ``(K + jitter I) c = values`` and return the interpolant.

    With ``jitter=0`` the result reproduces ``values`` at ``sites`` up to
    solver accuracy; the jitter ladder only kicks in if ``K`` is numerically
    not positive definite.
    """
    if jitter < 0:
        raise InputError(f"jitter must be nonnegative, got {jitter}")
    sites = check_distinct(sites)
    values = np.asarray(values, dtype=float).reshape(-1)
    if len(values) != len(sites):
        raise InputError(f"{len(sites)} sites but {len(values)} values")
    if not np.all(np.isfinite(values)):
        raise InputError("values must be finite")
    if len(sites) == 0:
        return Interpolant(kernel, sites, values, jitter)
    L, used = cholesky(kernel_matrix(kernel, sites), jitter)
    coef = linalg.cho_solve((L, True), values)
    return Interpolant(kernel, sites, coef, used)


def eval_interpolant(model, query):
    return model(query)


def power_radicand(kernel, centers, chol, queries):
    """``k(x, x) - k_x^T K^{-1} k_x`` for each row of ``queries``.

    ``chol`` is the lower Cholesky factor of the kernel matrix of
    ``centers``.  No clamping is applied here.
    """
    queries = as_sites(queries)
    if len(centers) == 0:
        return np.ones(len(queries))
    kx = kernel(centers, queries)
    v = linalg.solve_triangular(chol, kx, lower=True, check_finite=False)
    return 1.0 - np.einsum("ij,ij->j", v, v)


def clamp_radicand(r):
    """Zero out rounding-level negative radicands, reject real negatives."""
    r = np.asarray(r, dtype=float)
    worst = r.min(initial=0.0)
    if worst < RADICAND_FLOOR:
        raise ConditioningError(
            f"power function radicand {worst:.3e} is below {RADICAND_FLOOR:g}"
        )
    return np.maximum(r, 0.0)


def power_function(kernel, sites, query):
    """Power function of ``kernel`` on ``sites`` at ``query``.

    ``query`` may be a single point (returns a float) or an ``(m, d)`` set.
    For an empty site set this is ``sqrt(k(x, x)) = 1``.
    """
    sites = check_distinct(sites)
    if len(sites) == 0:
        # nothing to compare against; take the query's own dimension
        a = np.asarray(query, dtype=float)
        sites = np.zeros((0, a.shape[-1] if a.ndim == 2 else (a.size if a.ndim == 1 else 1)))
    q, single = as_query(query, sites.shape[1])
    _check_dims(q, sites)
    chol = cholesky(kernel_matrix(kernel, sites))[0] if len(sites) else None
    p = np.sqrt(clamp_radicand(power_radicand(kernel, sites, chol, q)))
    return float(p[0]) if single else p


def rkhs_norm_estimate(model):
    """Native-space norm ``sqrt(c^T K c)`` of a kernel expansion."""
    c = model.coefficients
    if len(c) == 0 or not np.any(c):
        return 0.0
    K = kernel_matrix(model.kernel, model.centers)
    return float(np.sqrt(max(c @ K @ c, 0.0)))


def fill_distance(sites, domain_samples):
    """Largest distance from a domain sample to its nearest site."""
    sites = as_sites(sites)
    samples = as_sites(domain_samples)
    if len(sites) == 0:
        raise InputError("fill distance needs at least one site")
    if len(samples) == 0:
        raise InputError("fill distance needs at least one domain sample")
    _check_dims(samples, sites)
    dist, _ = cKDTree(sites).query(samples)
    return float(dist.max())


def separation_distance(sites):
    """Half the smallest pairwise distance between sites."""
    sites = as_sites(sites)
    if len(sites) < 2:
        raise InputError("separation distance needs at least two sites")
    return 0.5 * float(pdist(sites).min())
