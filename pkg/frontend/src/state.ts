// Session state and the client-side mirror of the server's eligibility rule.
// The mirror exists purely for UX; the server stays authoritative.

import type { RecommendResponse } from "./types.js";

export type MapLayer = "inet" | "upzones" | "recommendations";

export const STRICTNESS_MESSAGE =
  "Pick at least k+1 regions, and make sure your k-th most reviewed region " +
  "has strictly more reviews than the (k+1)-th.";

export const HISTORY_LIMIT = 5;

export interface SessionState {
  visited: Map<string, number>;
  k: number;
  m: number;
  activeLayer: MapLayer;
  lastResponse: RecommendResponse | null;
  history: RecommendResponse[];
}

export function newSession(k = 3, m = 2): SessionState {
  return {
    visited: new Map(),
    k,
    m,
    activeLayer: "recommendations",
    lastResponse: null,
    history: [],
  };
}

/** Map click: select with a default count of 1, or unselect. */
export function toggleRegion(state: SessionState, regionId: string): void {
  if (state.visited.has(regionId)) {
    state.visited.delete(regionId);
  } else {
    state.visited.set(regionId, 1);
  }
}

/** Count stepper; stepping down to zero removes the region. */
export function setCount(state: SessionState, regionId: string, count: number): void {
  if (count <= 0) {
    state.visited.delete(regionId);
  } else {
    state.visited.set(regionId, Math.floor(count));
  }
}

export interface Eligibility {
  eligible: boolean;
  reason?: string;
}

export function checkEligibility(state: SessionState): Eligibility {
  if (state.k < 1) {
    return { eligible: false, reason: "k must be at least 1" };
  }
  if (state.visited.size < state.k + 1) {
    return { eligible: false, reason: STRICTNESS_MESSAGE };
  }
  const counts = [...state.visited.values()].sort((a, b) => b - a);
  const atK = counts[state.k - 1];
  const afterK = counts[state.k];
  if (atK === undefined || afterK === undefined || atK <= afterK) {
    return { eligible: false, reason: STRICTNESS_MESSAGE };
  }
  return { eligible: true };
}

export function visitedPayload(state: SessionState): [string, number][] {
  return [...state.visited.entries()].sort((a, b) => (a[0] < b[0] ? -1 : 1));
}

/** Store the newest response, keeping the last HISTORY_LIMIT queries. */
export function pushResponse(state: SessionState, response: RecommendResponse): void {
  state.lastResponse = response;
  state.history.push(response);
  if (state.history.length > HISTORY_LIMIT) {
    state.history.splice(0, state.history.length - HISTORY_LIMIT);
  }
}
