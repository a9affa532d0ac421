import type { RecommendResponse } from "../src/types.js";

export const RECOMMEND_FIXTURE: RecommendResponse = {
  config_hash: "abc123def456",
  k: 3,
  m: 2,
  user_mode: "explorer",
  recommendations: [
    {
      region_id: "h8:4:-1",
      score: 0.93,
      explanation: "Recommended mainly because it is close to places you love.",
      top_factors: [
        { feature: "geographic_mean_to_top", shapley: 1.42, phrase: "it is close to places you love" },
        { feature: "venue_categories_mean_to_top", shapley: 0.66, phrase: "its venues resemble your favorite spots" },
        { feature: "population_mean_to_bottom", shapley: -0.2, phrase: "its population size counts against it" },
      ],
      sub_regions: [
        { region_id: "h9:12:-3", score: 0.88 },
        { region_id: "h9:12:-4", score: 0.71 },
      ],
    },
    {
      region_id: "h8:2:0",
      score: 0.81,
      explanation: "Recommended mainly because its venues resemble your favorite spots.",
      top_factors: [
        { feature: "venue_categories_mean_to_top", shapley: 0.9, phrase: "its venues resemble your favorite spots" },
      ],
      sub_regions: [],
    },
    {
      region_id: "h8:0:3",
      score: 0.5,
      explanation: "No strong signals either way for this area.",
      top_factors: [],
      sub_regions: [{ region_id: "h9:1:9", score: 0.5 }],
    },
  ],
};

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
