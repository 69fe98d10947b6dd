import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

function fakeFetch(handler: (url: string, init?: RequestInit) => { status: number; body?: unknown }) {
  const calls: { url: string; init?: RequestInit }[] = [];
  const fn = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    const { status, body } = handler(url, init);
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => body,
    } as Response;
  };
  return { fn, calls };
}

describe("ApiClient", () => {
  it("lists candidates with a status filter", async () => {
    const { fn, calls } = fakeFetch(() => ({ status: 200, body: [{ id: "c1" }] }));
    const api = new ApiClient("", fn);
    const rows = await api.listCandidates("pending");
    expect(rows[0].id).toBe("c1");
    expect(calls[0].url).toBe("/api/candidates?status=pending");
  });

  it("posts verdicts with the exact wire body", async () => {
    const { fn, calls } = fakeFetch(() => ({ status: 204 }));
    const api = new ApiClient("", fn);
    await api.postVerdict("c9", "accept", "ann");
    expect(calls[0].url).toBe("/api/candidates/c9/verdict");
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({
      verdict: "accept",
      reviewer: "ann",
    });
  });

  it("raises ApiError with the status on failure", async () => {
    const { fn } = fakeFetch(() => ({ status: 404, body: { error: "nope" } }));
    const api = new ApiClient("", fn);
    await expect(api.getCandidate("ghost")).rejects.toThrowError(ApiError);
    await expect(api.getCandidate("ghost")).rejects.toMatchObject({ status: 404 });
  });

  it("escapes candidate ids in paths", async () => {
    const { fn, calls } = fakeFetch(() => ({ status: 200, body: {} }));
    await new ApiClient("", fn).getCandidate("a/b");
    expect(calls[0].url).toBe("/api/candidates/a%2Fb");
  });
});
