"""Multi-level recommendation (top-k coarse regions, top-m sub-regions each)
with template-based natural-language explanations of the Shapley drivers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..ingest import Region
from .boosting import TreeEnsembleModel
from .features import DEFAULT_SPECS, assemble_features
from .labeling import UserInterestProfile
from .shapley import Attribution, shapley_attribution

NEUTRAL_EXPLANATION = "No strong signals either way for this area."

# phrase per (factor, reference set, contribution sign)
_PHRASES = {
    ("geographic", "top", "+"): "it is close to places you love",
    ("geographic", "top", "-"): "it is far from places you love",
    ("geographic", "bottom", "+"): "it sits away from areas you rarely revisit",
    ("geographic", "bottom", "-"): "it is near areas you rarely revisit",
    ("venue_categories", "top", "+"): "its venues resemble your favorite spots",
    ("venue_categories", "top", "-"): "its venues differ from your favorite spots",
    ("venue_categories", "bottom", "+"): "its venues differ from places you skip",
    ("venue_categories", "bottom", "-"): "its venues resemble places you skip",
    ("scenes", "top", "+"): "its cultural scene matches your favorite areas",
    ("scenes", "top", "-"): "its cultural scene differs from your favorite areas",
}

_FACTOR_NOUN = {
    "population": "population size",
    "income": "income level",
    "education": "education level",
    "employment": "employment level",
    "vote": "political leaning",
    "race": "demographic mix",
    "scenes": "cultural scene",
    "geographic": "location",
    "venue_categories": "venue mix",
}


def _split_feature(name: str) -> tuple[str, str] | None:
    for ref in ("top", "bottom"):
        suffix = f"_mean_to_{ref}"
        if name.endswith(suffix):
            return name[: -len(suffix)], ref
    return None


def _phrase(feature: str, contribution: float) -> str:
    sign = "+" if contribution > 0 else "-"
    parts = _split_feature(feature)
    if parts is None:
        noun = _FACTOR_NOUN.get(feature.replace("candidate_", ""), feature)
        direction = "works in its favor" if contribution > 0 else "counts against it"
        return f"its {noun} {direction}"
    factor, ref = parts
    hit = _PHRASES.get((factor, ref, sign))
    if hit:
        return hit
    noun = _FACTOR_NOUN.get(factor, factor)
    anchor = "your favorite areas" if ref == "top" else "areas you visit less"
    likeness = "matches" if (sign == "+") == (factor == "venue_categories") else "differs from"
    return f"its {noun} {likeness} {anchor}"


@dataclass
class ExplanationFactor:
    feature: str
    shapley: float
    phrase: str

    def to_dict(self) -> dict:
        return {"feature": self.feature, "shapley": self.shapley, "phrase": self.phrase}


def explain(attribution: Attribution, top_n: int = 3) -> tuple[str, list[ExplanationFactor]]:
    """Natural-language summary of the strongest Shapley contributions plus
    the structured top factors in |shapley| order."""
    ranked = [(f, v) for f, v in attribution.top_factors(top_n) if abs(v) > 1e-12]
    if not ranked:
        return NEUTRAL_EXPLANATION, []
    factors = [ExplanationFactor(feature=f, shapley=v, phrase=_phrase(f, v)) for f, v in ranked]
    clauses = [f.phrase for f in factors]
    if len(clauses) == 1:
        body = clauses[0]
    else:
        body = "; ".join(clauses[:-1]) + "; and " + clauses[-1]
    return f"Recommended mainly because {body}.", factors


@dataclass
class SubRecommendation:
    region_id: str
    score: float


@dataclass
class Recommendation:
    region_id: str
    score: float
    explanation: str
    top_factors: list[ExplanationFactor]
    sub_regions: list[SubRecommendation] = field(default_factory=list)


def score_candidates(
    model: TreeEnsembleModel,
    profile: UserInterestProfile,
    candidates: list[str],
    regions_by_id: dict[str, Region],
    specs=DEFAULT_SPECS,
) -> list[tuple[str, float, np.ndarray]]:
    """Positive-class probability per candidate; candidates whose features
    cannot be assembled are skipped. Sorted by (score desc, region_id asc)."""
    include_population = "candidate_population" in model.feature_names
    scored = []
    for candidate in sorted(candidates):
        fv = assemble_features(profile, candidate, regions_by_id, specs, include_population)
        if fv.missing:
            continue
        row = np.asarray([fv.values[n] for n in model.feature_names])
        prob = float(model.predict_proba(row.reshape(1, -1))[0])
        scored.append((candidate, prob, row))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored


def recommend(
    profile: UserInterestProfile,
    models: dict[str, TreeEnsembleModel],
    candidates: list[str],
    regions_by_id: dict[str, Region],
    k: int = 3,
    m: int = 2,
    sub_candidates: dict[str, list[str]] | None = None,
    specs=DEFAULT_SPECS,
) -> list[Recommendation]:
    """Top-k coarse regions by the region-level model; inside each, top-m
    sub-regions by the sub-region model when present. Sub-candidates are
    scored against the same user profile, so serving needs only the coarse
    visited history."""
    coarse_model = models.get("region")
    if coarse_model is None:
        raise ValueError("no region-level model")
    if m >= 1 and sub_candidates and "subregion" not in models:
        raise ValueError("sub-region candidates supplied but no sub-region model trained")

    out: list[Recommendation] = []
    for region_id, score, row in score_candidates(coarse_model, profile, candidates, regions_by_id, specs)[:k]:
        attribution = shapley_attribution(coarse_model, row)
        text, factors = explain(attribution)
        subs: list[SubRecommendation] = []
        if sub_candidates and region_id in sub_candidates:
            fine = score_candidates(models["subregion"], profile, sub_candidates[region_id],
                                    regions_by_id, specs)
            subs = [SubRecommendation(region_id=r, score=s) for r, s, _ in fine[:m]]
        out.append(Recommendation(region_id=region_id, score=score, explanation=text,
                                  top_factors=factors, sub_regions=subs))
    return out
