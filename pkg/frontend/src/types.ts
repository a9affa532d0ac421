// Payload shapes of the /api/v1 endpoints. The UI never computes scores or
// attributions; everything numeric here is server-provided.

export interface ExplanationFactor {
  feature: string;
  shapley: number;
  phrase: string;
}

export interface SubRecommendation {
  region_id: string;
  score: number;
}

export interface Recommendation {
  region_id: string;
  score: number;
  explanation: string;
  top_factors: ExplanationFactor[];
  sub_regions: SubRecommendation[];
}

export interface RecommendResponse {
  config_hash: string;
  k: number;
  m: number;
  user_mode: string;
  recommendations: Recommendation[];
}

export interface RecommendRequest {
  visited: [string, number][];
  k: number;
  m: number;
  user_mode?: string;
}

export interface RegionFeature {
  id: string;
  level?: string;
  centroid?: [number, number];
  ring: [number, number][] | null;
}

export interface RegionsResponse {
  config_hash: string;
  features: RegionFeature[];
}

export interface InetResponse {
  config_hash: string;
  edges: [string, string, number][];
  self_loops: Record<string, number>;
  stats: { n_nodes: number; n_edges: number; n_self_loops: number; total_weight: number };
}

export interface UpzonesResponse {
  config_hash: string;
  n_zones: number;
  modularity: number;
  zones: Record<string, number>;
  profiles: Record<string, [string, number][]>;
}
