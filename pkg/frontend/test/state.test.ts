import { describe, expect, it } from "vitest";

import {
  HISTORY_LIMIT,
  STRICTNESS_MESSAGE,
  checkEligibility,
  newSession,
  pushResponse,
  setCount,
  toggleRegion,
  visitedPayload,
} from "../src/state.js";
import type { RecommendResponse } from "../src/types.js";

function response(hash: string): RecommendResponse {
  return { config_hash: hash, k: 3, m: 2, user_mode: "auto", recommendations: [] };
}

describe("region selection", () => {
  it("click selects with default count 1, second click removes", () => {
    const s = newSession();
    toggleRegion(s, "r1");
    expect(s.visited.get("r1")).toBe(1);
    toggleRegion(s, "r1");
    expect(s.visited.has("r1")).toBe(false);
  });

  it("stepping a count down to zero removes the region", () => {
    const s = newSession();
    toggleRegion(s, "r1");
    setCount(s, "r1", 4);
    expect(s.visited.get("r1")).toBe(4);
    setCount(s, "r1", 0);
    expect(s.visited.has("r1")).toBe(false);
  });
});

describe("eligibility mirror", () => {
  it("needs at least k+1 regions", () => {
    const s = newSession(3);
    for (const [r, c] of [["a", 5], ["b", 4], ["c", 3]] as const) {
      s.visited.set(r, c);
    }
    const verdict = checkEligibility(s);
    expect(verdict.eligible).toBe(false);
    expect(verdict.reason).toBe(STRICTNESS_MESSAGE);
  });

  it("needs a strict count gap at rank k", () => {
    const s = newSession(3);
    for (const [r, c] of [["a", 5], ["b", 4], ["c", 3], ["d", 3], ["e", 1]] as const) {
      s.visited.set(r, c);
    }
    expect(checkEligibility(s).eligible).toBe(false);
    s.visited.set("c", 4); // break the tie
    expect(checkEligibility(s).eligible).toBe(true);
  });

  it("payload is deterministic", () => {
    const s = newSession();
    s.visited.set("zz", 2);
    s.visited.set("aa", 1);
    expect(visitedPayload(s)).toEqual([
      ["aa", 1],
      ["zz", 2],
    ]);
  });
});

describe("query history", () => {
  it("keeps the last five responses", () => {
    const s = newSession();
    for (let i = 0; i < 8; i++) {
      pushResponse(s, response(`h${i}`));
    }
    expect(s.history).toHaveLength(HISTORY_LIMIT);
    expect(s.history[0]?.config_hash).toBe("h3");
    expect(s.lastResponse?.config_hash).toBe("h7");
  });
});
