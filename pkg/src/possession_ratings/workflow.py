"""End-to-end steps shared by the command line and the experiment scripts."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import GridSpec
from .design import GroupingScheme, PlayerRegistry, PossessionMatrix, build_matrix, id_sort_key, \
    position_grouping
from .errors import ConfigurationError
from .events import check_orphans, parse_events, parse_rosters
from .genlasso import DMatrixSpec, adaptive_weights
from .possessions import filter_valuable, segment
from .selection import CVResult, cross_validate, make_plan
from .solvers import FitResult, PenaltySpec, default_grid, fit, fit_ridge, lambda_max

DEFAULT_GROUPING = {"group_lasso": "position", "exclusive_lasso": "position"}
# ridge pilot for adaptive pair weights, relative to the lasso lambda_max
PILOT_RIDGE_RATIO = 1e-2


@dataclass
class IngestResult:
    possessions: list
    valuable: list
    registry: PlayerRegistry
    rosters: list


def ingest(events: bytes, rosters: bytes, event_format: str = "simple_csv",
           sub_tolerance: float = 1.0, roster_list=None) -> IngestResult:
    ev = parse_events(events, event_format)
    ro = roster_list if roster_list is not None else parse_rosters(rosters)
    check_orphans(ev, ro)
    by_id = {r.match_id: r for r in ro}
    out = []
    for mid in sorted(ev, key=id_sort_key):
        if mid not in by_id:
            raise ConfigurationError(f"no roster for match {mid}")
        out.extend(segment(ev[mid], by_id[mid], sub_tolerance))
    return IngestResult(out, filter_valuable(out), PlayerRegistry.from_rosters(ro), ro)


def grouping_for(name: str, registry: PlayerRegistry) -> GroupingScheme:
    if name == "position":
        return position_grouping(registry)
    if name == "position_team":
        return position_grouping(registry, split_by_team=True)
    n = 2 * len(registry)
    if name == "singleton":
        return GroupingScheme.singletons(n)
    if name == "single":
        return GroupingScheme.single(n)
    raise ConfigurationError(f"unknown grouping {name!r}")


def penalty_spec(kind: str, registry: PlayerRegistry, matrix: PossessionMatrix,
                 grouping: str | None = None, adaptive: bool = False) -> PenaltySpec:
    """Penalty of the given kind at lambda 0 (the level is set later)."""
    if kind in DEFAULT_GROUPING:
        return PenaltySpec(kind, 0.0, grouping=grouping_for(grouping or DEFAULT_GROUPING[kind],
                                                            registry))
    if grouping is not None:
        raise ConfigurationError(f"penalty {kind} takes no grouping")
    if kind == "generalized_lasso":
        k = matrix.n_players
        weights = None
        if adaptive:
            pilot = fit_ridge(matrix, None, PILOT_RIDGE_RATIO * lambda_max(matrix, None))
            weights = (adaptive_weights(pilot.beta[:k]), adaptive_weights(pilot.beta[k:2 * k]))
        return PenaltySpec(kind, 0.0, d_spec=DMatrixSpec.for_players(k, weights=weights))
    return PenaltySpec(kind, 0.0)


def lambda_grid(matrix, spec: PenaltySpec, grid: GridSpec) -> np.ndarray:
    if grid.values:
        return np.array(grid.values)
    return default_grid(lambda_max(matrix, None, spec, spec.kind), grid.n, grid.ratio)


def select_and_fit(matrix: PossessionMatrix, spec: PenaltySpec, lam: float | None = None,
                   grid: GridSpec = GridSpec(), folds: int = 10, seed: int = 0,
                   **fit_kw) -> tuple[FitResult, CVResult | None]:
    """Fit at ``lam``, or choose it by stratified cross-validation over the grid."""
    if lam is not None:
        return fit(matrix, None, spec.with_lambda(lam), **fit_kw), None
    values = lambda_grid(matrix, spec, grid)
    plan = make_plan(matrix.y, folds, stratified=True, seed=seed)
    cv = cross_validate(matrix, None, spec, values, plan, **fit_kw)
    return fit(matrix, None, spec.with_lambda(cv.selected_lambda), **fit_kw), cv


def design(possessions, registry: PlayerRegistry, match_ids=None) -> PossessionMatrix:
    if match_ids is not None:
        match_ids = set(match_ids)
        possessions = [p for p in possessions if p.match_id in match_ids]
    return build_matrix(possessions, registry)
