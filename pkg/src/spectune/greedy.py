"""Greedy selection of interpolation sites (P-greedy and f-greedy).

Both variants grow a subset ``X_m`` of the candidate sites one point at a
time, always adding the unselected candidate with the largest error
indicator:

* P-greedy uses the power function of the current subset, which depends on
  the geometry only and spreads points quasi-uniformly;
* f-greedy uses the absolute residual ``|f - s_m|`` of the interpolant
  ``s_m`` on the current subset, so it needs the target values.

Ties are resolved in favour of the lowest candidate index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InputError
from .kernels import (
    as_point,
    as_sites,
    check_distinct,
    cholesky,
    clamp_radicand,
    fit_interpolant,
    kernel_matrix,
    power_radicand,
)


class GreedyCriterion(str, Enum):
    P_GREEDY = "p-greedy"
    F_GREEDY = "f-greedy"


@dataclass
class GreedyHistory:
    """Selections made by :func:`run_greedy`, in order.

    ``indices`` point into the candidate array; ``indicator_values`` are the
    indicator maxima at the moment each point was picked.  ``residual_max``
    (f-greedy only) is the largest residual over all candidates after each
    addition.
    """

    selected: np.ndarray
    indices: list = field(default_factory=list)
    indicator_values: list = field(default_factory=list)
    residual_max: list | None = None


def indicator_scan(criterion, kernel, sites, values, selected_idx):
    """Indicator of ``criterion`` at every candidate for the given subset.

    Returns a float array aligned with ``sites``.  For P-greedy the values
    are power function values; for f-greedy absolute residuals.
    """
    criterion = GreedyCriterion(criterion)
    sites = as_sites(sites)
    selected_idx = list(selected_idx)
    centers = sites[selected_idx]
    if criterion is GreedyCriterion.P_GREEDY:
        return np.sqrt(_radicands(kernel, centers, sites))
    if values is None:
        raise InputError("f-greedy needs target values")
    values = np.asarray(values, dtype=float).reshape(-1)
    model = fit_interpolant(kernel, centers, values[selected_idx])
    return np.abs(values - model(sites))


def _radicands(kernel, centers, sites):
    chol = cholesky(kernel_matrix(kernel, centers))[0] if len(centers) else None
    return clamp_radicand(power_radicand(kernel, centers, chol, sites))


def greedy_indicator(criterion, kernel, selected, sites, values, candidate):
    """Indicator value at a single ``candidate`` for the subset ``selected``.

    ``selected`` are points (not indices).  For f-greedy both ``selected``
    and ``candidate`` must be rows of ``sites`` so that target values are
    known there.
    """
    criterion = GreedyCriterion(criterion)
    sites = as_sites(sites)
    selected = as_sites(selected) if np.size(selected) else np.zeros((0, sites.shape[1]))
    candidate = as_point(candidate)
    if criterion is GreedyCriterion.P_GREEDY:
        return float(np.sqrt(_radicands(kernel, check_distinct(selected), candidate[None, :])[0]))
    values = np.asarray(values, dtype=float).reshape(-1)
    cand = _row_index(sites, candidate)
    if cand is None:
        raise InputError("f-greedy candidate must be one of the data sites")
    idx = []
    for p in selected:
        j = _row_index(sites, p)
        if j is None:
            raise InputError("f-greedy selected points must be data sites")
        idx.append(j)
    model = fit_interpolant(kernel, sites[idx], values[idx])
    return float(abs(values[cand] - model(sites[cand:cand + 1])[0]))


def _row_index(sites, point):
    hits = np.flatnonzero(np.all(np.isclose(sites, point, rtol=0.0, atol=1e-12), axis=1))
    return int(hits[0]) if len(hits) else None


def run_greedy(criterion, kernel, sites, values=None, budget=1, start=()):
    """Greedy site selection over the candidate array ``sites``.

    Parameters
    ----------
    criterion : GreedyCriterion or str
    kernel : Kernel
    sites : (n, d) array
        Candidate sites; must be pairwise distinct.
    values : (n,) array, optional
        Target values at ``sites`` (required for f-greedy).
    budget : int
        Number of points to add.
    start : sequence of int
        Indices of a warm-start subset (empty by default).  These are not
        reported in the history.

    Returns
    -------
    GreedyHistory
    """
    criterion = GreedyCriterion(criterion)
    sites = check_distinct(sites)
    n = len(sites)
    selected = [int(i) for i in start]
    if len(set(selected)) != len(selected) or any(not 0 <= i < n for i in selected):
        raise InputError("warm start indices must be distinct and in range")
    if budget < 1 or budget > n - len(selected):
        raise InputError(f"budget {budget} exceeds the {n - len(selected)} available candidates")
    if criterion is GreedyCriterion.F_GREEDY and values is None:
        raise InputError("f-greedy needs target values")

    hist = GreedyHistory(
        selected=np.zeros((0, sites.shape[1])),
        residual_max=[] if criterion is GreedyCriterion.F_GREEDY else None,
    )
    taken = np.zeros(n, dtype=bool)
    taken[selected] = True
    for _ in range(budget):
        eta = indicator_scan(criterion, kernel, sites, values, selected)
        masked = np.where(taken, -np.inf, eta)
        best = int(np.argmax(masked))
        selected.append(best)
        taken[best] = True
        hist.indices.append(best)
        hist.indicator_values.append(float(eta[best]))
        if hist.residual_max is not None:
            res = indicator_scan(criterion, kernel, sites, values, selected)
            hist.residual_max.append(float(res.max()))
    hist.selected = sites[hist.indices]
    return hist
