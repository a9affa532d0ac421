import { describe, expect, it } from "vitest";

import {
  renderEligibilityHint,
  renderErrorBanner,
  renderRecommendationCards,
} from "../src/cards.js";
import { RECOMMEND_FIXTURE } from "./fixtures.js";

function attrValues(html: string, attr: string): string[] {
  return [...html.matchAll(new RegExp(`${attr}="([^"]*)"`, "g"))].map((m) => m[1]!);
}

describe("recommendation cards", () => {
  it("renders cards in exact API order", () => {
    const html = renderRecommendationCards(RECOMMEND_FIXTURE);
    const article = /<article[^>]*data-region="([^"]+)"/g;
    const order = [...html.matchAll(article)].map((m) => m[1]);
    expect(order).toEqual(RECOMMEND_FIXTURE.recommendations.map((r) => r.region_id));
  });

  it("shows the API's explanation text and top factors verbatim", () => {
    const html = renderRecommendationCards(RECOMMEND_FIXTURE);
    for (const rec of RECOMMEND_FIXTURE.recommendations) {
      expect(html).toContain(rec.explanation);
      for (const factor of rec.top_factors) {
        expect(html).toContain(factor.phrase);
        expect(html).toContain(`data-feature="${factor.feature}"`);
        expect(html).toContain(`data-shapley="${factor.shapley}"`);
      }
    }
  });

  it("carries server scores untouched in data attributes", () => {
    const html = renderRecommendationCards(RECOMMEND_FIXTURE);
    const scores = attrValues(html, "data-score").map(Number);
    const expected = [
      ...RECOMMEND_FIXTURE.recommendations.flatMap((r) => [
        r.score,
        ...r.sub_regions.map((s) => s.score),
      ]),
    ];
    expect(scores).toEqual(expected);
  });

  it("caps sub-regions at what the API sent", () => {
    const html = renderRecommendationCards(RECOMMEND_FIXTURE);
    const subs = [...html.matchAll(/class="sub-region"/g)];
    expect(subs).toHaveLength(3);
  });

  it("renders hints and retryable banners", () => {
    expect(renderEligibilityHint("be stricter")).toContain("be stricter");
    const banner = renderErrorBanner("offline");
    expect(banner).toContain("offline");
    expect(banner).toContain('data-action="retry"');
  });
});
