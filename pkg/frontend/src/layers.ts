// Map overlays as SVG strings: node-strength choropleth for the interest
// network, categorical zone coloring with hoverable top terms for UPZones.
// A small cache keyed by (layer, config hash) avoids refetching artifacts
// that have not changed.

import type { InetResponse, RegionFeature, UpzonesResponse } from "./types.js";

const ZONE_PALETTE = [
  "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
  "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#1f77b4", "#d62728",
];

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

function viewBox(features: RegionFeature[]): string {
  const xs: number[] = [];
  const ys: number[] = [];
  for (const f of features) {
    for (const [x, y] of f.ring ?? []) {
      xs.push(x);
      ys.push(y);
    }
  }
  if (!xs.length) return "0 0 1 1";
  const minX = Math.min(...xs);
  const minY = Math.min(...ys);
  const w = Math.max(...xs) - minX || 1;
  const h = Math.max(...ys) - minY || 1;
  return `${minX} ${minY} ${w} ${h}`;
}

function ringPath(ring: [string, string] | [number, number][]): string {
  return (ring as [number, number][]).map(([x, y]) => `${x},${y}`).join(" ");
}

/** Node strength = weighted degree including self-loops, server data only. */
export function nodeStrength(net: InetResponse): Record<string, number> {
  const strength: Record<string, number> = {};
  for (const [src, dst, w] of net.edges) {
    strength[src] = (strength[src] ?? 0) + w;
    strength[dst] = (strength[dst] ?? 0) + w;
  }
  for (const [node, w] of Object.entries(net.self_loops)) {
    strength[node] = (strength[node] ?? 0) + w;
  }
  return strength;
}

function heatColor(t: number): string {
  // dark blue -> yellow ramp
  const r = Math.round(30 + 225 * t);
  const g = Math.round(40 + 200 * t);
  const b = Math.round(120 - 90 * t);
  return `rgb(${r},${g},${b})`;
}

export function renderInetLayer(features: RegionFeature[], net: InetResponse): string {
  const strength = nodeStrength(net);
  const max = Math.max(...Object.values(strength), 1);
  const polys = features
    .filter((f) => f.ring)
    .map((f) => {
      const s = (strength[f.id] ?? 0) / max;
      return `<polygon data-region="${esc(f.id)}" points="${ringPath(f.ring!)}"
        fill="${heatColor(s)}" stroke="white" stroke-width="0.5">
        <title>${esc(f.id)}: strength ${strength[f.id] ?? 0}</title></polygon>`;
    })
    .join("");
  const legend = `<div class="legend">node strength, max ${max}</div>`;
  return `<svg class="layer inet" viewBox="${viewBox(features)}">${polys}</svg>${legend}`;
}

export function renderUpzonesLayer(features: RegionFeature[], zones: UpzonesResponse): string {
  const cells: Record<number, number> = {};
  for (const zone of Object.values(zones.zones)) {
    cells[zone] = (cells[zone] ?? 0) + 1;
  }
  const ranked = Object.keys(cells)
    .map(Number)
    .sort((a, b) => cells[b]! - cells[a]! || a - b);
  const rankOf = new Map(ranked.map((z, i) => [z, i + 1]));

  const polys = features
    .filter((f) => f.ring && zones.zones[f.id] !== undefined)
    .map((f) => {
      const zone = zones.zones[f.id]!;
      const fill = ZONE_PALETTE[zone % ZONE_PALETTE.length];
      const terms = (zones.profiles[String(zone)] ?? [])
        .slice(0, 6)
        .map(([term]) => term)
        .join(", ");
      return `<polygon data-region="${esc(f.id)}" data-zone="${zone}"
        points="${ringPath(f.ring!)}" fill="${fill}" stroke="white" stroke-width="0.5">
        <title>zone ${zone}: ${esc(terms)}</title></polygon>`;
    })
    .join("");

  const labels = ranked
    .slice(0, 6)
    .map((zone) => {
      const members = features.filter((f) => zones.zones[f.id] === zone && f.ring);
      if (!members.length) return "";
      const pts = members.flatMap((f) => f.ring!);
      const cx = pts.reduce((acc, p) => acc + p[0], 0) / pts.length;
      const cy = pts.reduce((acc, p) => acc + p[1], 0) / pts.length;
      return `<text x="${cx}" y="${cy}" class="zone-label" data-zone="${zone}"
        text-anchor="middle">${rankOf.get(zone)}</text>`;
    })
    .join("");
  return `<svg class="layer upzones" viewBox="${viewBox(features)}">${polys}${labels}</svg>`;
}

export function renderMissingLayer(layer: string): string {
  return `<div class="layer-missing" role="note">layer ${esc(layer)} has no artifact yet</div>`;
}

/** Rendered layers keyed by config hash; unchanged artifacts never refetch. */
export class LayerCache {
  private entries = new Map<string, string>();

  key(layer: string, configHash: string): string {
    return `${layer}@${configHash}`;
  }

  get(layer: string, configHash: string): string | undefined {
    return this.entries.get(this.key(layer, configHash));
  }

  set(layer: string, configHash: string, html: string): void {
    this.entries.set(this.key(layer, configHash), html);
  }
}
