// Thin typed client for the urbanet API. The base URL is fixed at build
// time (URBANET_API_BASE) and the fetch implementation is injectable so
// tests can stub the server.

import type {
  InetResponse,
  RecommendRequest,
  RecommendResponse,
  RegionFeature,
  RegionsResponse,
  UpzonesResponse,
} from "./types.js";

declare const process: { env?: Record<string, string | undefined> } | undefined;

export function defaultApiBase(): string {
  const fromGlobal = (globalThis as Record<string, unknown>)["URBANET_API_BASE"];
  if (typeof fromGlobal === "string" && fromGlobal) return fromGlobal;
  if (typeof process !== "undefined" && process?.env?.URBANET_API_BASE) {
    return process.env.URBANET_API_BASE;
  }
  return "/api/v1";
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`API ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string = defaultApiBase(),
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.base}${path}`, init);
    } catch (err) {
      throw new ApiError(0, err instanceof Error ? err.message : "network unavailable");
    }
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const detail =
        typeof body?.detail === "string" ? body.detail : JSON.stringify(body);
      throw new ApiError(response.status, detail);
    }
    return body as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("/health");
  }

  levels(): Promise<{ levels: string[] }> {
    return this.request("/levels");
  }

  async regions(level?: string): Promise<RegionsResponse> {
    const query = level ? `?level=${encodeURIComponent(level)}` : "";
    const raw = await this.request<{
      config_hash: string;
      regions: { features: Array<{ properties: Record<string, unknown>; geometry: { coordinates: [number, number][][] } | null }> };
    }>(`/regions${query}`);
    const features: RegionFeature[] = raw.regions.features.map((f) => ({
      id: String(f.properties["id"]),
      level: f.properties["level"] as string | undefined,
      centroid: f.properties["centroid"] as [number, number] | undefined,
      ring: f.geometry ? f.geometry.coordinates[0] ?? null : null,
    }));
    return { config_hash: raw.config_hash, features };
  }

  inet(platform: string, level: string): Promise<InetResponse> {
    return this.request(`/inet?platform=${platform}&level=${level}`);
  }

  upzones(platform: string, level: string): Promise<UpzonesResponse> {
    return this.request(`/upzones?platform=${platform}&level=${level}`);
  }

  recommend(body: RecommendRequest, signal?: AbortSignal): Promise<RecommendResponse> {
    return this.request("/recommend", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
  }
}
