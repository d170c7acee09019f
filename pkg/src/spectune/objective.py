"""Filter-parameter tuning objective and the end-to-end tuning run.

The objective of a filter setting (order, cutoff) is minus the mean PIQUE
score of the slices reconstructed from a fixed stack of sinograms.  It is
maximized with :func:`spectune.bayesopt.run_bo` over an ``M x M`` grid of
orders in [1, 10] and cutoffs in [0.1, 1].
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bayesopt import INIT_PRESETS, BetaSchedule, BoConfig, regrets, run_bo
from .errors import EvaluationError, InputError
from .kernels import Kernel
from .pique import PiqueConfig, pique_score
from .tomo import (
    FilterParams,
    add_poisson_noise,
    fbp_volume,
    jaszczak_inserts,
    radon_volume,
    sphere_phantom,
)

ORDER_RANGE = (1.0, 10.0)
CUTOFF_RANGE = (0.1, 1.0)


@dataclass(frozen=True)
class GridDomain:
    """Equispaced search grid; node ``(i, j)`` has flat index ``i * M + j``."""

    M: int = 1000

    def __post_init__(self):
        if self.M < 2:
            raise InputError(f"grid needs at least 2 nodes per axis, got {self.M}")

    @property
    def rho_axis(self):
        return np.linspace(*ORDER_RANGE, self.M)

    @property
    def omega_axis(self):
        return np.linspace(*CUTOFF_RANGE, self.M)

    def points(self):
        r, w = np.meshgrid(self.rho_axis, self.omega_axis, indexing="ij")
        return np.column_stack([r.ravel(), w.ravel()])

    def index_of(self, rho, omega, tol=1e-9):
        """Grid indices ``(i, j)`` of a node, or ``None`` if off-grid."""
        i = int(round((rho - ORDER_RANGE[0]) / (ORDER_RANGE[1] - ORDER_RANGE[0]) * (self.M - 1)))
        j = int(round((omega - CUTOFF_RANGE[0]) / (CUTOFF_RANGE[1] - CUTOFF_RANGE[0]) * (self.M - 1)))
        if not (0 <= i < self.M and 0 <= j < self.M):
            return None
        if abs(self.rho_axis[i] - rho) > tol or abs(self.omega_axis[j] - omega) > tol:
            return None
        return i, j


@dataclass
class ObjectiveContext:
    """Data and settings behind the objective, plus its memo table.

    ``reconstructions`` counts volume reconstructions actually performed.
    """

    sinograms: list
    size: int
    pique_config: PiqueConfig = field(default_factory=PiqueConfig)
    domain: GridDomain = field(default_factory=GridDomain)
    cache: dict = field(default_factory=dict)
    reconstructions: int = 0

    def __post_init__(self):
        self.sinograms = list(self.sinograms)
        if not self.sinograms:
            raise InputError("objective needs at least one slice")

    def key(self, params):
        idx = self.domain.index_of(params.order, params.cutoff)
        return ("grid", *idx) if idx is not None else ("point", params.order, params.cutoff)


def slice_scores(ctx, params):
    """PIQUE of every reconstructed slice (no caching).

    Slices are rounded to float32 before scoring, the precision they are
    stored with on disk, so scores recomputed from saved volumes agree exactly.
    """
    vol = fbp_volume(ctx.sinograms, params, ctx.size).astype(np.float32).astype(np.float64)
    ctx.reconstructions += 1
    scores = []
    for z, sl in enumerate(vol):
        try:
            scores.append(pique_score(sl, ctx.pique_config))
        except InputError as exc:
            raise EvaluationError(f"slice {z}: {exc}") from exc
    return np.array(scores)


def objective_value(ctx, params):
    """Minus the mean slice PIQUE for ``params``; memoized per grid node."""
    key = ctx.key(params)
    if key not in ctx.cache:
        ctx.cache[key] = -float(np.mean(slice_scores(ctx, params)))
    return ctx.cache[key]


@dataclass
class OracleResult:
    """Exhaustive objective table on a coarse grid (rows: order, cols: cutoff)."""

    rho_axis: np.ndarray
    omega_axis: np.ndarray
    values: np.ndarray

    @property
    def best_index(self):
        return np.unravel_index(int(np.argmax(self.values)), self.values.shape)

    @property
    def best_params(self):
        i, j = self.best_index
        return FilterParams(float(self.rho_axis[i]), float(self.omega_axis[j]))

    @property
    def best_value(self):
        return float(self.values.max())

    @property
    def pique(self):
        return -self.values

    @property
    def pique_range(self):
        return float(self.values.max() - self.values.min())


def grid_oracle(ctx, coarse_M):
    """Evaluate the objective on every node of a ``coarse_M x coarse_M`` grid."""
    if coarse_M < 2:
        raise InputError(f"coarse grid needs at least 2 nodes per axis, got {coarse_M}")
    dom = GridDomain(coarse_M)
    table = np.full((coarse_M, coarse_M), np.nan)
    rho, omega = dom.rho_axis, dom.omega_axis
    for i, r in enumerate(rho):
        for j, w in enumerate(omega):
            try:
                table[i, j] = objective_value(ctx, FilterParams(float(r), float(w)))
            except Exception as exc:
                raise EvaluationError(
                    f"oracle failed at order={r:.6g}, cutoff={w:.6g}: {exc}",
                    partial=OracleResult(rho, omega, table),
                ) from exc
    return OracleResult(rho, omega, table)


@dataclass
class TraceRow:
    step: int
    rho: float
    omega0: float
    pique: float
    beta_m: float | None
    schedule: str
    init_preset: str


@dataclass
class TuningReport:
    best_params: FilterParams
    best_pique: float
    trace: list
    wall_time: float
    simple_regret_curve: np.ndarray | None = None
    cumulative_regret: float | None = None

    @property
    def final_simple_regret(self):
        return None if self.simple_regret_curve is None else float(self.simple_regret_curve[-1])


def tuning_config(domain, schedule="constant", init="nine", budget=20, lam=0.9, kernel=None):
    """BO settings for the filter search with a named initialization preset."""
    if init not in INIT_PRESETS:
        raise InputError(f"unknown init preset {init!r}; expected one of {sorted(INIT_PRESETS)}")
    return BoConfig(
        candidate_grid=domain.points(),
        schedule=BetaSchedule(schedule, lam=lam),
        init_set=np.array(INIT_PRESETS[init]),
        budget=budget,
        kernel=kernel or Kernel("matern", 0.1),
    )


def tune(ctx, config, oracle=None, init_preset=""):
    """Maximize the objective with kernel BO and summarize the run.

    With an ``oracle`` table, regrets are measured against the better of the
    oracle optimum and the best value the run itself found (the search grid
    is finer than the oracle grid, so the run may beat it).
    """
    t0 = time.perf_counter()

    def f(site):
        return objective_value(ctx, FilterParams(float(site[0]), float(site[1])))

    report = run_bo(config, f)
    values = np.asarray(report.state.observed_values)
    trace = [
        TraceRow(k + 1, float(site[0]), float(site[1]), -float(v), beta,
                 config.schedule.kind, init_preset)
        for k, (site, v, beta) in enumerate(
            zip(report.state.observed_sites, values, report.state.betas)
        )
    ]
    out = TuningReport(
        best_params=FilterParams(float(report.best_site[0]), float(report.best_site[1])),
        best_pique=-report.best_value,
        trace=trace,
        wall_time=0.0,
    )
    if oracle is not None:
        ref = max(oracle.best_value, float(values.max()))
        out.cumulative_regret, out.simple_regret_curve = regrets(values, ref)
    out.wall_time = time.perf_counter() - t0
    return out


def sphere_study(size=64, z_slices=8, num_angles=90, counts=1000.0, seed=0, ratio=5.0):
    """Sinograms of the hot/cold sphere phantom with Poisson noise.

    ``counts`` is the expected number of events in the brightest detector bin
    of each slice; ``None`` disables the noise.
    """
    vol = sphere_phantom(size, z_slices, jaszczak_inserts(ratio), background=1.0)
    sinos = radon_volume(vol, num_angles)
    if counts is not None:
        rng = np.random.default_rng(seed)
        sinos = [add_poisson_noise(s, counts, rng) for s in sinos]
    return sinos
