"""High/low-interest labeling of a user's regions and the returner/explorer
mobility split."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..inet import UserRegionCounts


@dataclass
class UserInterestProfile:
    user_id: str
    k: int
    ranked_regions: list[tuple[str, int]]  # (region_id, review count), best first
    top_set: list[str]
    bottom_set: list[str]
    eligible: bool

    @property
    def visited(self) -> list[str]:
        return [r for r, _ in self.ranked_regions]


def label_user(counts: UserRegionCounts, k: int) -> UserInterestProfile:
    """Rank a user's regions by review count and split top-k vs the rest.

    Eligibility requires more than k distinct regions and a strict count gap
    between the k-th and (k+1)-th region. Count ties elsewhere are broken by
    earliest first interaction, then region id, so ranking is reproducible.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(
        counts.counts.items(),
        key=lambda kv: (-kv[1], counts.first_seen.get(kv[0], math.inf), kv[0]),
    )
    eligible = len(ranked) >= k + 1 and ranked[k - 1][1] > ranked[k][1]
    return UserInterestProfile(
        user_id=counts.user_id,
        k=k,
        ranked_regions=ranked,
        top_set=[r for r, _ in ranked[:k]],
        bottom_set=[r for r, _ in ranked[k:]],
        eligible=eligible,
    )


def radius_of_gyration(points: list[tuple[float, float, float]]) -> float:
    """Weighted RMS distance from the weighted centroid, in meters."""
    if not points:
        raise ValueError("no points")
    total = sum(w for _, _, w in points)
    if total <= 0:
        raise ValueError("weights must sum to a positive value")
    cx = sum(x * w for x, _, w in points) / total
    cy = sum(y * w for _, y, w in points) / total
    return math.sqrt(sum(w * ((x - cx) ** 2 + (y - cy) ** 2) for x, y, w in points) / total)


@dataclass(frozen=True)
class MobilitySummary:
    user_id: str
    r_g_all: float
    r_g_topk: float
    mobility_class: str  # "returner" or "explorer"
    degenerate: bool = False  # all visits collocated


def classify_mobility(
    profile: UserInterestProfile,
    centroids: dict[str, tuple[float, float]],
    k: int | None = None,
) -> MobilitySummary:
    """Returner iff the top-k radius of gyration exceeds half the overall one.

    Points are region centroids weighted by review counts. A user whose
    visits all collapse to one point is classified returner and flagged.
    """
    if not profile.eligible:
        raise ValueError(f"user {profile.user_id} is not eligible")
    k = profile.k if k is None else k
    all_points = [(*centroids[r], float(c)) for r, c in profile.ranked_regions]
    top_points = [(*centroids[r], float(c)) for r, c in profile.ranked_regions[:k]]
    r_all = radius_of_gyration(all_points)
    r_top = radius_of_gyration(top_points)
    if r_all == 0.0:
        return MobilitySummary(profile.user_id, 0.0, 0.0, "returner", degenerate=True)
    cls = "returner" if r_top > r_all / 2.0 else "explorer"
    return MobilitySummary(profile.user_id, r_all, r_top, cls)
