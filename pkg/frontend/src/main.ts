// DOM wiring: map clicks toggle regions, steppers adjust counts, one
// in-flight recommendation request at a time (newer cancels older).

import { ApiClient, ApiError } from "./api.js";
import {
  renderEligibilityHint,
  renderErrorBanner,
  renderRecommendationCards,
  renderVisitedList,
} from "./cards.js";
import { LayerCache, renderInetLayer, renderMissingLayer, renderUpzonesLayer } from "./layers.js";
import {
  checkEligibility,
  newSession,
  pushResponse,
  setCount,
  toggleRegion,
  visitedPayload,
  type MapLayer,
} from "./state.js";
import type { RegionFeature } from "./types.js";

const api = new ApiClient();
const session = newSession();
const layerCache = new LayerCache();
let features: RegionFeature[] = [];
let inflight: AbortController | null = null;

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function refreshVisited(): void {
  el("visited").innerHTML = renderVisitedList(session.visited);
}

async function submit(): Promise<void> {
  const verdict = checkEligibility(session);
  if (!verdict.eligible) {
    el("cards").innerHTML = renderEligibilityHint(verdict.reason ?? "not eligible");
    return;
  }
  inflight?.abort();
  inflight = new AbortController();
  try {
    const response = await api.recommend(
      { visited: visitedPayload(session), k: session.k, m: session.m, user_mode: "auto" },
      inflight.signal,
    );
    pushResponse(session, response);
    el("cards").innerHTML = renderRecommendationCards(response);
  } catch (err) {
    if (err instanceof ApiError && err.status === 422) {
      el("cards").innerHTML = renderEligibilityHint(err.detail);
    } else if (err instanceof DOMException && err.name === "AbortError") {
      // superseded by a newer request
    } else {
      const message = err instanceof ApiError ? err.detail : "service unavailable";
      el("cards").innerHTML = renderErrorBanner(message);
    }
  }
}

async function showLayer(layer: MapLayer): Promise<void> {
  session.activeLayer = layer;
  const map = el("map");
  if (layer === "recommendations") {
    map.innerHTML = renderMissingLayer("recommendations happen in the cards panel");
    return;
  }
  try {
    if (layer === "inet") {
      const net = await api.inet("GP", features[0]?.level ?? "h8");
      const cached = layerCache.get(layer, net.config_hash);
      map.innerHTML = cached ?? renderInetLayer(features, net);
      if (!cached) layerCache.set(layer, net.config_hash, map.innerHTML);
    } else {
      const zones = await api.upzones("GP", features[0]?.level ?? "h8");
      const cached = layerCache.get(layer, zones.config_hash);
      map.innerHTML = cached ?? renderUpzonesLayer(features, zones);
      if (!cached) layerCache.set(layer, zones.config_hash, map.innerHTML);
    }
  } catch {
    map.innerHTML = renderMissingLayer(layer);
  }
}

function bindEvents(): void {
  el("map").addEventListener("click", (event) => {
    const target = (event.target as Element).closest("[data-region]");
    if (target) {
      toggleRegion(session, target.getAttribute("data-region")!);
      refreshVisited();
    }
  });
  el("visited").addEventListener("click", (event) => {
    const button = (event.target as Element).closest("button[data-action]");
    const row = (event.target as Element).closest("[data-region]");
    if (!button || !row) return;
    const region = row.getAttribute("data-region")!;
    const current = session.visited.get(region) ?? 0;
    setCount(session, region, current + (button.getAttribute("data-action") === "inc" ? 1 : -1));
    refreshVisited();
  });
  el("cards").addEventListener("click", (event) => {
    if ((event.target as Element).closest("button[data-action='retry']")) {
      void submit();
    }
  });
  el("go").addEventListener("click", () => void submit());
  for (const layer of ["inet", "upzones", "recommendations"] as const) {
    el(`layer-${layer}`).addEventListener("click", () => void showLayer(layer));
  }
  (el("k") as HTMLInputElement).addEventListener("change", (event) => {
    session.k = Math.max(1, Number((event.target as HTMLInputElement).value));
  });
  (el("m") as HTMLInputElement).addEventListener("change", (event) => {
    session.m = Math.max(1, Number((event.target as HTMLInputElement).value));
  });
}

async function boot(): Promise<void> {
  bindEvents();
  try {
    const regions = await api.regions();
    features = regions.features;
    await showLayer("upzones");
  } catch {
    el("map").innerHTML = renderMissingLayer("regions");
  }
  refreshVisited();
}

if (typeof document !== "undefined") {
  void boot();
}
