import { describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { LayerCache, nodeStrength, renderInetLayer, renderMissingLayer, renderUpzonesLayer } from "../src/layers.js";
import type { InetResponse, RegionFeature, UpzonesResponse } from "../src/types.js";
import { jsonResponse } from "./fixtures.js";

const FEATURES: RegionFeature[] = [
  { id: "h8:0:0", ring: [[0, 0], [1, 0], [1, 1], [0, 1]] },
  { id: "h8:1:0", ring: [[1, 0], [2, 0], [2, 1], [1, 1]] },
  { id: "h8:2:0", ring: [[2, 0], [3, 0], [3, 1], [2, 1]] },
];

const NET: InetResponse = {
  config_hash: "hash-1",
  edges: [
    ["h8:0:0", "h8:1:0", 5],
    ["h8:1:0", "h8:2:0", 2],
  ],
  self_loops: { "h8:0:0": 3 },
  stats: { n_nodes: 3, n_edges: 2, n_self_loops: 1, total_weight: 10 },
};

const ZONES: UpzonesResponse = {
  config_hash: "hash-2",
  n_zones: 2,
  modularity: 0.41,
  zones: { "h8:0:0": 0, "h8:1:0": 0, "h8:2:0": 1 },
  profiles: { "0": [["Pub", 3.1], ["Cafe", 2.0]], "1": [["Museum", 1.4]] },
};

describe("inet layer", () => {
  it("node strength comes straight from the server payload", () => {
    expect(nodeStrength(NET)).toEqual({ "h8:0:0": 8, "h8:1:0": 7, "h8:2:0": 2 });
  });

  it("renders one polygon per region with a legend", () => {
    const html = renderInetLayer(FEATURES, NET);
    expect([...html.matchAll(/<polygon/g)]).toHaveLength(3);
    expect(html).toContain("legend");
  });
});

describe("upzones layer", () => {
  it("colors by zone and labels the largest zones by rank", () => {
    const html = renderUpzonesLayer(FEATURES, ZONES);
    expect(html).toContain('data-zone="0"');
    expect(html).toContain('data-zone="1"');
    // zone 0 has two cells: rank 1
    const label = html.match(/<text[^>]*data-zone="0"[^>]*>(\d+)<\/text>/);
    expect(label?.[1]).toBe("1");
  });

  it("exposes top terms for hover", () => {
    const html = renderUpzonesLayer(FEATURES, ZONES);
    expect(html).toContain("Pub, Cafe");
  });

  it("missing layers render a notice", () => {
    expect(renderMissingLayer("upzones")).toContain("upzones");
  });
});

describe("layer cache", () => {
  it("unchanged config hash means no refetch", async () => {
    const fetchSpy = vi.fn(async () => jsonResponse(NET));
    const api = new ApiClient("/api/v1", fetchSpy);
    const cache = new LayerCache();

    const first = await api.inet("GP", "h8");
    let html = cache.get("inet", first.config_hash);
    expect(html).toBeUndefined();
    cache.set("inet", first.config_hash, renderInetLayer(FEATURES, first));

    // toggling back: same config hash -> reuse rendered layer, skip fetch
    html = cache.get("inet", first.config_hash);
    expect(html).toBeDefined();
    expect(fetchSpy).toHaveBeenCalledTimes(1);

    // a new config hash misses the cache
    expect(cache.get("inet", "other-hash")).toBeUndefined();
  });
});
