// Contract tests against a fixture server: the UI blocks ineligible sets
// before any network call, renders cards exactly in API order, and surfaces
// the API's eligibility/error responses without recomputing anything.

import { describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { renderEligibilityHint, renderRecommendationCards } from "../src/cards.js";
import {
  STRICTNESS_MESSAGE,
  checkEligibility,
  newSession,
  pushResponse,
  visitedPayload,
} from "../src/state.js";
import { jsonResponse, RECOMMEND_FIXTURE } from "./fixtures.js";

function eligibleSession() {
  const s = newSession(3, 2);
  for (const [r, c] of [["a", 9], ["b", 7], ["c", 5], ["d", 3], ["e", 2], ["f", 1]] as const) {
    s.visited.set(r, c);
  }
  return s;
}

describe("recommendation round trip", () => {
  it("submits the visited set and renders cards in API order", async () => {
    const fetchSpy = vi.fn(async (url: string, init?: RequestInit) => {
      expect(url).toBe("/api/v1/recommend");
      const body = JSON.parse(String(init?.body));
      expect(body.visited).toEqual(visitedPayload(eligibleSession()));
      expect(body.k).toBe(3);
      return jsonResponse(RECOMMEND_FIXTURE);
    });
    const api = new ApiClient("/api/v1", fetchSpy);
    const session = eligibleSession();

    expect(checkEligibility(session).eligible).toBe(true);
    const response = await api.recommend({
      visited: visitedPayload(session),
      k: session.k,
      m: session.m,
    });
    pushResponse(session, response);
    const html = renderRecommendationCards(response);

    const order = [...html.matchAll(/<article[^>]*data-region="([^"]+)"/g)].map((m) => m[1]);
    expect(order).toEqual(RECOMMEND_FIXTURE.recommendations.map((r) => r.region_id));
    expect(fetchSpy).toHaveBeenCalledTimes(1);
    expect(session.lastResponse?.config_hash).toBe(RECOMMEND_FIXTURE.config_hash);
  });

  it("blocks ineligible sets client-side with the strictness message", () => {
    const fetchSpy = vi.fn();
    const session = newSession(3, 2);
    for (const [r, c] of [["a", 5], ["b", 4], ["c", 3], ["d", 3], ["e", 1]] as const) {
      session.visited.set(r, c);
    }
    const verdict = checkEligibility(session);
    expect(verdict.eligible).toBe(false);
    const html = renderEligibilityHint(verdict.reason!);
    expect(html).toContain(STRICTNESS_MESSAGE);
    expect(fetchSpy).not.toHaveBeenCalled(); // no request ever leaves the client
  });

  it("shows the API's top-3 factors verbatim on each card", async () => {
    const api = new ApiClient("/api/v1", async () => jsonResponse(RECOMMEND_FIXTURE));
    const response = await api.recommend({ visited: [["a", 2], ["b", 1]], k: 1, m: 1 });
    const html = renderRecommendationCards(response);
    for (const rec of response.recommendations) {
      for (const factor of rec.top_factors) {
        expect(html).toContain(factor.phrase);
        expect(html).toContain(factor.feature);
      }
    }
  });

  it("surfaces a server 422 as an inline eligibility hint", async () => {
    const api = new ApiClient("/api/v1", async () =>
      jsonResponse({ detail: "need at least k+1 visited regions" }, 422));
    try {
      await api.recommend({ visited: [["a", 1], ["b", 1]], k: 3, m: 2 });
      expect.unreachable();
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      const apiErr = err as ApiError;
      expect(apiErr.status).toBe(422);
      expect(renderEligibilityHint(apiErr.detail)).toContain("k+1 visited regions");
    }
  });

  it("keeps session state when the API is unavailable", async () => {
    const api = new ApiClient("/api/v1", async () => {
      throw new Error("connection refused");
    });
    const session = eligibleSession();
    const before = visitedPayload(session);
    await expect(
      api.recommend({ visited: before, k: session.k, m: session.m }),
    ).rejects.toMatchObject({ status: 0 });
    expect(visitedPayload(session)).toEqual(before);
    expect(session.lastResponse).toBeNull();
  });
});
