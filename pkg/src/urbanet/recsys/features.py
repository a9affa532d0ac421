"""Pairwise-mean feature assembly: for every candidate region, the mean
distance/similarity to the user's other top regions and to their bottom
regions, one pair of features per factor."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..ingest import Region
from ..metrics import FACTORS, FactorMetricSpec, MetricUnavailable, factor_metric
from .labeling import UserInterestProfile

logger = logging.getLogger(__name__)

DEFAULT_SPECS = tuple(FactorMetricSpec.for_factor(f) for f in FACTORS)


def feature_names(specs=DEFAULT_SPECS, include_population: bool = True) -> list[str]:
    names = []
    for spec in specs:
        names.append(f"{spec.factor}_mean_to_top")
        names.append(f"{spec.factor}_mean_to_bottom")
    if include_population:
        names.append("candidate_population")
    return names


@dataclass
class FeatureVector:
    user_id: str
    candidate: str
    values: dict[str, float]
    label: bool
    missing: list[str] = field(default_factory=list)


def _mean_to(spec, candidate_region, references, regions_by_id):
    others = [r for r in references if r != candidate_region.region_id]
    if not others:
        raise MetricUnavailable("empty reference set after excluding the candidate")
    vals = [factor_metric(spec, candidate_region, regions_by_id[r]) for r in others]
    return sum(vals) / len(vals)


def assemble_features(
    profile: UserInterestProfile,
    candidate: str,
    regions_by_id: dict[str, Region],
    specs=DEFAULT_SPECS,
    include_population: bool = True,
) -> FeatureVector:
    """Features of one candidate against the profile's top and bottom sets.

    Factors that cannot be computed are listed in `missing` rather than
    imputed; training drops such rows and counts them.
    """
    region = regions_by_id.get(candidate)
    if region is None:
        raise KeyError(f"unknown candidate region {candidate!r}")
    values: dict[str, float] = {}
    missing: list[str] = []
    for spec in specs:
        for ref_name, refs in (("top", profile.top_set), ("bottom", profile.bottom_set)):
            name = f"{spec.factor}_mean_to_{ref_name}"
            try:
                values[name] = _mean_to(spec, region, refs, regions_by_id)
            except (MetricUnavailable, KeyError):
                missing.append(name)
    if include_population:
        pop = region.context.population if region.context else None
        if pop is None:
            missing.append("candidate_population")
        else:
            values["candidate_population"] = float(pop)
    return FeatureVector(
        user_id=profile.user_id,
        candidate=candidate,
        values=values,
        label=candidate in profile.top_set,
        missing=missing,
    )


@dataclass
class FeatureTable:
    feature_names: list[str]
    X: np.ndarray
    y: np.ndarray
    groups: list[str]  # user id per row, for grouped splits
    rows: list[tuple[str, str]]  # (user_id, candidate)
    n_excluded: int = 0


def build_feature_table(
    profiles: list[UserInterestProfile],
    regions_by_id: dict[str, Region],
    specs=DEFAULT_SPECS,
    include_population: bool = True,
) -> FeatureTable:
    """One training row per (eligible user, visited region); rows with any
    unavailable feature are excluded and counted."""
    names = feature_names(specs, include_population)
    data: list[list[float]] = []
    labels: list[int] = []
    groups: list[str] = []
    rows: list[tuple[str, str]] = []
    excluded = 0
    for profile in profiles:
        if not profile.eligible:
            continue
        for candidate in profile.visited:
            fv = assemble_features(profile, candidate, regions_by_id, specs, include_population)
            if fv.missing:
                excluded += 1
                continue
            data.append([fv.values[n] for n in names])
            labels.append(1 if fv.label else 0)
            groups.append(profile.user_id)
            rows.append((profile.user_id, candidate))
    if excluded:
        logger.info("excluded %d feature rows with unavailable factors", excluded)
    X = np.asarray(data, dtype=float) if data else np.empty((0, len(names)))
    return FeatureTable(
        feature_names=names,
        X=X,
        y=np.asarray(labels, dtype=float),
        groups=groups,
        rows=rows,
        n_excluded=excluded,
    )
