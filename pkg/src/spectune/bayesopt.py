"""Kernel-based Bayesian optimization on a finite candidate grid.

At each step the next query maximizes the acquisition

    eta(x) = s(x) + beta_m * P(x)**2

over the not-yet-observed grid nodes, where ``s`` is the kernel interpolant
of all observations so far and ``P`` its power function.  ``beta_m`` follows
one of three schedules:

* ``constant``    beta_m = N
* ``increasing``  beta_m = sqrt(log(10/3 * m**2 * pi**2))
* ``decreasing``  beta_m = lam**(m - 1) * N

with ``N`` the native-space norm of the current interpolant, recomputed after
every observation unless ``refresh_norm`` is switched off.
"""
from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import EvaluationError, InputError, StateError
from .kernels import (
    Kernel,
    as_point,
    as_sites,
    cholesky,
    clamp_radicand,
    fit_interpolant,
    kernel_matrix,
    power_radicand,
    rkhs_norm_estimate,
)

SCHEDULES = ("constant", "increasing", "decreasing")

# initialization sets used for the (order, cutoff) filter search
INIT_PRESETS = {
    "single": [(5.0, 0.5)],
    "four": [(r, w) for r in (4.0, 8.0) for w in (0.4, 0.8)],
    "nine": [(r, w) for r in (3.0, 6.0, 9.0) for w in (0.3, 0.6, 0.9)],
}

# rows of the candidate grid scored per block during the acquisition scan
SCAN_CHUNK = 1 << 16


@dataclass(frozen=True)
class BetaSchedule:
    """Exploration weight schedule.

    ``norm_estimate`` is only read by the constant and decreasing kinds.
    With ``refresh_norm=False`` the optimizer keeps the given
    ``norm_estimate`` instead of recomputing it from the interpolant.
    """

    kind: str = "constant"
    lam: float = 0.9
    norm_estimate: float | None = None
    refresh_norm: bool = True

    def __post_init__(self):
        if self.kind not in SCHEDULES:
            raise InputError(f"unknown schedule {self.kind!r}; expected one of {SCHEDULES}")
        if self.kind == "decreasing" and not 0.0 < self.lam < 1.0:
            raise InputError(f"lambda must lie in (0, 1), got {self.lam}")
        if self.norm_estimate is not None and not self.norm_estimate >= 0:
            raise InputError(f"norm estimate must be nonnegative, got {self.norm_estimate}")


def beta_value(schedule, m):
    """Exploration weight for acquisition step ``m >= 1``."""
    if int(m) != m or m < 1:
        raise InputError(f"step index must be a positive integer, got {m}")
    if schedule.kind == "increasing":
        return math.sqrt(math.log(10.0 / 3.0 * m * m * math.pi ** 2))
    if schedule.norm_estimate is None:
        raise InputError(f"the {schedule.kind} schedule needs a norm estimate")
    if schedule.kind == "constant":
        return float(schedule.norm_estimate)
    return schedule.lam ** (m - 1) * schedule.norm_estimate


@dataclass
class BoConfig:
    """Settings for :func:`run_bo`.

    ``init_set`` points are snapped to the nearest ``candidate_grid`` node;
    a point further than half a grid step (per coordinate) is rejected.
    """

    candidate_grid: np.ndarray
    schedule: BetaSchedule = field(default_factory=BetaSchedule)
    init_set: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    budget: int = 20
    kernel: Kernel = field(default_factory=Kernel)

    def __post_init__(self):
        self.candidate_grid = as_sites(self.candidate_grid)
        d = self.candidate_grid.shape[1]
        init = np.asarray(self.init_set, dtype=float)
        init = init.reshape(-1, d) if init.size else np.zeros((0, d))
        if self.budget < 1:
            raise InputError(f"budget must be positive, got {self.budget}")
        if len(init) >= self.budget:
            raise InputError(
                f"initial set has {len(init)} points but the budget is {self.budget}; "
                "at least one acquisition step is required"
            )
        if len(init) == 0 and self.schedule.kind != "increasing" and self.schedule.norm_estimate is None:
            raise InputError(f"the {self.schedule.kind} schedule needs a nonempty initial set")
        if self.budget > len(self.candidate_grid):
            raise InputError("budget exceeds the number of grid nodes")
        self.init_indices = snap_to_grid(self.candidate_grid, init)
        if len(set(self.init_indices)) != len(self.init_indices):
            raise InputError("initial points snap to the same grid node")
        self.init_set = self.candidate_grid[self.init_indices]


def snap_to_grid(grid, points):
    """Indices of the grid nodes nearest to ``points``."""
    grid = as_sites(grid)
    points = np.asarray(points, dtype=float).reshape(-1, grid.shape[1])
    tol = np.array([_half_step(grid[:, j]) for j in range(grid.shape[1])])
    out = []
    for p in points:
        i = int(np.argmin(np.sum((grid - p) ** 2, axis=1)))
        if np.any(np.abs(grid[i] - p) > tol + 1e-12):
            raise InputError(f"point {tuple(p)} is not within half a step of any grid node")
        out.append(i)
    return out


def _half_step(coords):
    u = np.unique(coords)
    return 0.5 * float(np.diff(u).max()) if len(u) > 1 else 0.0


@dataclass
class BoState:
    """Observations gathered so far.

    ``step`` counts acquisition steps (initial points excluded).
    """

    observed_indices: list = field(default_factory=list)
    observed_sites: list = field(default_factory=list)
    observed_values: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    step: int = 0
    norm_estimate: float = 0.0

    def sites_array(self, dim):
        return np.asarray(self.observed_sites, dtype=float).reshape(-1, dim)


@dataclass
class Surrogate:
    """Interpolant of the observations plus the factor of its kernel matrix."""

    kernel: Kernel
    centers: np.ndarray
    coefficients: np.ndarray
    chol: np.ndarray | None

    @classmethod
    def fit(cls, kernel, sites, values):
        sites = as_sites(sites)
        if len(sites) == 0:
            return cls(kernel, sites, np.zeros(0), None)
        chol, _ = cholesky(kernel_matrix(kernel, sites))
        coef = linalg.cho_solve((chol, True), np.asarray(values, dtype=float))
        return cls(kernel, sites, coef, chol)

    def mean(self, queries):
        queries = as_sites(queries)
        if len(self.centers) == 0:
            return np.zeros(len(queries))
        return self.kernel(queries, self.centers) @ self.coefficients

    def power_squared(self, queries):
        return clamp_radicand(power_radicand(self.kernel, self.centers, self.chol, queries))

    def acquisition(self, queries, beta):
        return self.mean(queries) + beta * self.power_squared(queries)


def acquisition(kernel, state, beta_m, candidate):
    """Acquisition value ``s(x) + beta_m * P(x)**2`` at ``candidate``.

    ``candidate`` may be a single point or an ``(m, d)`` set.
    """
    if not state.observed_sites:
        raise InputError("acquisition needs at least one observation")
    dim = len(state.observed_sites[0])
    sur = Surrogate.fit(kernel, state.sites_array(dim), state.observed_values)
    c = np.asarray(candidate, dtype=float)
    single = c.ndim <= 1 and c.size == dim
    out = sur.acquisition(as_point(c)[None, :] if single else as_sites(c), beta_m)
    return float(out[0]) if single else out


def scan_acquisition(surrogate, grid, beta, exclude=()):
    """Acquisition over the whole grid, with ``exclude`` rows set to -inf."""
    grid = as_sites(grid)
    out = np.empty(len(grid))
    for lo in range(0, len(grid), SCAN_CHUNK):
        hi = min(lo + SCAN_CHUNK, len(grid))
        block = grid[lo:hi]
        kx = surrogate.kernel(surrogate.centers, block) if len(surrogate.centers) else None
        if kx is None:
            out[lo:hi] = beta
            continue
        mean = kx.T @ surrogate.coefficients
        v = linalg.solve_triangular(surrogate.chol, kx, lower=True, check_finite=False)
        r = 1.0 - np.einsum("ij,ij->j", v, v)
        # observed nodes can sit marginally below zero; they are masked anyway
        r[np.isin(np.arange(lo, hi), exclude)] = 0.0
        out[lo:hi] = mean + beta * clamp_radicand(r)
    if len(exclude):
        out[list(exclude)] = -np.inf
    return out


def _schedule_for(config, state):
    sched = config.schedule
    if sched.kind != "increasing" and sched.refresh_norm:
        sched = dataclasses.replace(sched, norm_estimate=state.norm_estimate)
    return sched


def _observe(config, state, index, objective, beta):
    site = config.candidate_grid[index]
    try:
        value = float(objective(site))
    except Exception as exc:
        raise EvaluationError(
            f"objective failed at grid node {index} {tuple(site)}: {exc}", partial=state
        ) from exc
    if not math.isfinite(value):
        raise EvaluationError(f"objective returned {value} at grid node {index}", partial=state)
    state.observed_indices.append(int(index))
    state.observed_sites.append(site.copy())
    state.observed_values.append(value)
    state.betas.append(beta)
    dim = config.candidate_grid.shape[1]
    model = fit_interpolant(config.kernel, state.sites_array(dim), state.observed_values)
    state.norm_estimate = rkhs_norm_estimate(model)
    return state


def bo_step(config, state, objective):
    """Pick the acquisition maximizer, evaluate it, and return the new state."""
    grid = config.candidate_grid
    if len(state.observed_indices) >= len(grid):
        raise StateError("every grid node has already been observed")
    m = state.step + 1
    beta = beta_value(_schedule_for(config, state), m)
    sur = Surrogate.fit(config.kernel, state.sites_array(grid.shape[1]), state.observed_values)
    scores = scan_acquisition(sur, grid, beta, exclude=state.observed_indices)
    index = int(np.argmax(scores))
    _observe(config, state, index, objective, beta)
    state.step = m
    return state


def initialize(config, objective):
    """Evaluate the objective on the initial set."""
    state = BoState()
    for i in config.init_indices:
        _observe(config, state, i, objective, None)
    return state


@dataclass
class BoReport:
    best_site: np.ndarray
    best_value: float
    best_index: int
    state: BoState
    n_init: int
    simple_regret_curve: np.ndarray | None = None
    cumulative_regret: float | None = None
    wall_time: float = 0.0

    @property
    def history(self):
        """Observation trace as ``(grid_index, site, value, beta)`` tuples."""
        s = self.state
        return list(zip(s.observed_indices, s.observed_sites, s.observed_values, s.betas))


def run_bo(config, objective, true_optimum=None):
    """Run the full optimization loop.

    The objective is called on every initial point and then once per
    acquisition step, ``config.budget`` times in total.  If it raises, an
    :class:`EvaluationError` is raised whose ``partial`` attribute holds the
    state reached so far.

    ``true_optimum`` (when known) adds regret diagnostics to the report.
    """
    t0 = time.perf_counter()
    state = initialize(config, objective)
    while len(state.observed_values) < config.budget:
        bo_step(config, state, objective)
    values = np.asarray(state.observed_values)
    best = int(np.argmax(values))
    report = BoReport(
        best_site=np.asarray(state.observed_sites[best]),
        best_value=float(values[best]),
        best_index=state.observed_indices[best],
        state=state,
        n_init=len(config.init_indices),
    )
    if true_optimum is not None:
        report.cumulative_regret, report.simple_regret_curve = regrets(values, true_optimum)
    report.wall_time = time.perf_counter() - t0
    return report


def regrets(values, true_optimum):
    """Cumulative regret and the simple-regret curve of a value trace.

    ``simple[t]`` is the gap between ``true_optimum`` and the best of the
    first ``t + 1`` values.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    if len(values) and values.max() > true_optimum + 1e-9:
        raise InputError(
            f"observed value {values.max()} exceeds the declared optimum {true_optimum}"
        )
    gaps = true_optimum - values
    simple = true_optimum - np.maximum.accumulate(values) if len(values) else np.zeros(0)
    return float(gaps.sum()), simple
