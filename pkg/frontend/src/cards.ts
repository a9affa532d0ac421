// Recommendation cards as HTML strings. Order and every number rendered
// come from the API payload untouched; bar widths are presentation only.

import type { Recommendation, RecommendResponse } from "./types.js";

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function factorBars(rec: Recommendation): string {
  const maxAbs = Math.max(...rec.top_factors.map((f) => Math.abs(f.shapley)), 1e-12);
  return rec.top_factors
    .map((f) => {
      const width = Math.round((Math.abs(f.shapley) / maxAbs) * 100);
      const sign = f.shapley >= 0 ? "pos" : "neg";
      return `
      <div class="factor" data-feature="${esc(f.feature)}" data-shapley="${f.shapley}">
        <span class="factor-phrase">${esc(f.phrase)}</span>
        <div class="factor-bar ${sign}" style="width:${width}%"></div>
        <span class="factor-name">${esc(f.feature)}</span>
      </div>`;
    })
    .join("");
}

function subList(rec: Recommendation): string {
  if (!rec.sub_regions.length) {
    return "";
  }
  const items = rec.sub_regions
    .map(
      (s) =>
        `<li class="sub-region" data-region="${esc(s.region_id)}" data-score="${s.score}">` +
        `${esc(s.region_id)} <span class="score">${s.score.toFixed(3)}</span></li>`,
    )
    .join("");
  return `<details class="sub-regions"><summary>nearby picks</summary><ol>${items}</ol></details>`;
}

export function renderCard(rec: Recommendation, rank: number): string {
  return `
  <article class="card" data-region="${esc(rec.region_id)}" data-score="${rec.score}" data-rank="${rank}">
    <header>
      <span class="rank">#${rank}</span>
      <h3>${esc(rec.region_id)}</h3>
      <span class="score">${rec.score.toFixed(3)}</span>
    </header>
    <p class="explanation">${esc(rec.explanation)}</p>
    <div class="factors">${factorBars(rec)}</div>
    ${subList(rec)}
  </article>`;
}

/** Cards in exactly the order the API returned them. */
export function renderRecommendationCards(response: RecommendResponse): string {
  const cards = response.recommendations
    .map((rec, i) => renderCard(rec, i + 1))
    .join("\n");
  return `<section class="cards" data-config-hash="${esc(response.config_hash)}"
    data-user-mode="${esc(response.user_mode)}">${cards}</section>`;
}

export function renderEligibilityHint(reason: string): string {
  return `<div class="hint eligibility" role="alert">${esc(reason)}</div>`;
}

export function renderErrorBanner(message: string): string {
  return `<div class="banner error" role="alert">
    <span>${esc(message)}</span>
    <button type="button" data-action="retry">Retry</button>
  </div>`;
}

export function renderVisitedList(visited: Map<string, number>): string {
  const rows = [...visited.entries()]
    .sort((a, b) => (a[0] < b[0] ? -1 : 1))
    .map(
      ([region, count]) => `
      <li class="visited" data-region="${esc(region)}">
        <span>${esc(region)}</span>
        <button type="button" data-action="dec">-</button>
        <span class="count">${count}</span>
        <button type="button" data-action="inc">+</button>
      </li>`,
    )
    .join("");
  return `<ul class="visited-list">${rows}</ul>`;
}
