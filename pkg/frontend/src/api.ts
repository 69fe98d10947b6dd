/** Thin client for the review service; fetch is injectable for tests. */

import { CandidateDetail, CandidateSummary, Stats, VerdictValue } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path);
    if (!resp.ok) {
      throw new ApiError(resp.status, `GET ${path} -> ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  listCandidates(status = "pending"): Promise<CandidateSummary[]> {
    return this.getJson(`/api/candidates?status=${encodeURIComponent(status)}`);
  }

  getCandidate(id: string): Promise<CandidateDetail> {
    return this.getJson(`/api/candidates/${encodeURIComponent(id)}`);
  }

  getStats(): Promise<Stats> {
    return this.getJson("/api/stats");
  }

  async postVerdict(id: string, verdict: VerdictValue, reviewer: string): Promise<void> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/api/candidates/${encodeURIComponent(id)}/verdict`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ verdict, reviewer }),
      },
    );
    if (!resp.ok) {
      throw new ApiError(resp.status, `verdict on ${id} -> ${resp.status}`);
    }
  }
}
