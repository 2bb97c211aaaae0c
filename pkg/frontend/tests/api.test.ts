import { describe, expect, it, vi } from "vitest";

import {
  NotReadyError,
  QueueFullError,
  ServiceClient,
  ServiceError,
} from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function pngResponse(bytes: Uint8Array, headers: Record<string, string> = {}): Response {
  return new Response(bytes.slice().buffer as ArrayBuffer, {
    status: 200,
    headers: { "content-type": "image/png", ...headers },
  });
}

const CLIP_JSON = {
  clip_id: "c1",
  frames: 12,
  width: 192,
  height: 108,
  frame_rate: 24.0,
  disparity_min: 0.1,
  disparity_max: 1.4,
};

describe("ServiceClient", () => {
  it("registers a clip and maps the response fields", async () => {
    const fetchMock = vi.fn(async () => jsonResponse(CLIP_JSON));
    const client = new ServiceClient("http://svc:8000/", fetchMock);
    const info = await client.registerClip("/data/rgb", "/data/disp");

    expect(fetchMock).toHaveBeenCalledTimes(1);
    const [url, init] = fetchMock.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("http://svc:8000/clips");
    expect(init.method).toBe("POST");
    expect(JSON.parse(init.body as string)).toEqual({
      rgb_dir: "/data/rgb",
      disparity_dir: "/data/disp",
    });
    expect(info).toEqual({
      clipId: "c1",
      frames: 12,
      width: 192,
      height: 108,
      frameRate: 24.0,
      disparityMin: 0.1,
      disparityMax: 1.4,
    });
  });

  it("builds frame URLs with only the requested options", () => {
    const client = new ServiceClient("http://svc:8000");
    expect(client.frameUrl("c1", 3)).toBe("http://svc:8000/clips/c1/frame/3?kind=rgb");
    expect(
      client.frameUrl("c1", 0, { kind: "mask", focus: 0.5, layer: 2, layers: 8 }),
    ).toBe("http://svc:8000/clips/c1/frame/0?kind=mask&focus=0.5&layer=2&layers=8");
  });

  it("passes frame bytes through untouched", async () => {
    const bytes = new Uint8Array([137, 80, 78, 71, 1, 2, 3]);
    const fetchMock = vi.fn(async () => pngResponse(bytes));
    const client = new ServiceClient("http://svc:8000", fetchMock);
    const got = await client.fetchFrame("c1", 0, { kind: "rgb" });
    expect(Array.from(got)).toEqual(Array.from(bytes));
  });

  it("sends a single-frame preview request and reads the focus header", async () => {
    const bytes = new Uint8Array([9, 8, 7]);
    const fetchMock = vi.fn(async () =>
      pngResponse(bytes, { "X-Focus-Disparity": "0.612300" }),
    );
    const client = new ServiceClient("http://svc:8000", fetchMock);
    const result = await client.preview(
      "c1",
      { focusPx: { x: 20, y: 41, t: 3 } },
      { K: 8, N: 8, renderer: "mpi", previewScale: 0.25 },
      3,
    );

    const [url, init] = fetchMock.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("http://svc:8000/clips/c1/render");
    expect(JSON.parse(init.body as string)).toEqual({
      K: 8,
      N: 8,
      renderer: "mpi",
      preview_scale: 0.25,
      frames: 3,
      focus_px: { x: 20, y: 41, t: 3 },
    });
    expect(Array.from(result.png)).toEqual(Array.from(bytes));
    expect(result.focusDisparity).toBeCloseTo(0.6123, 6);
  });

  it("sends focus_disparity when the focus is numeric", async () => {
    const fetchMock = vi.fn(async () =>
      pngResponse(new Uint8Array([1]), { "X-Focus-Disparity": "0.7" }),
    );
    const client = new ServiceClient("http://svc:8000", fetchMock);
    await client.preview(
      "c1",
      { focusDisparity: 0.7 },
      { K: 0, N: 8, renderer: "raytrace", previewScale: 0.5 },
      0,
    );
    const body = JSON.parse(
      (fetchMock.mock.calls[0] as unknown as [string, RequestInit])[1].body as string,
    );
    expect(body.focus_disparity).toBe(0.7);
    expect(body.focus_px).toBeUndefined();
    expect(body.K).toBe(0);
  });

  it("forwards the abort signal to fetch", async () => {
    const fetchMock = vi.fn(async () =>
      pngResponse(new Uint8Array([1]), { "X-Focus-Disparity": "0" }),
    );
    const client = new ServiceClient("http://svc:8000", fetchMock);
    const abort = new AbortController();
    await client.preview(
      "c1",
      { focusDisparity: 0.5 },
      { K: 4, N: 8, renderer: "mpi", previewScale: 0.25 },
      0,
      abort.signal,
    );
    const [, init] = fetchMock.mock.calls[0] as unknown as [string, RequestInit];
    expect(init.signal).toBe(abort.signal);
  });

  it("starts a multi-frame job with a [start, end) range", async () => {
    const fetchMock = vi.fn(async () =>
      jsonResponse({ job_id: "j1", frames: [0, 12], focus_disparity: 0.61 }),
    );
    const client = new ServiceClient("http://svc:8000", fetchMock);
    const ticket = await client.startRender(
      "c1",
      { focusDisparity: 0.61 },
      { K: 8, N: 8, renderer: "mpi", previewScale: 1.0 },
      [0, 12],
    );
    const body = JSON.parse(
      (fetchMock.mock.calls[0] as unknown as [string, RequestInit])[1].body as string,
    );
    expect(body.frames).toEqual([0, 12]);
    expect(body.preview_scale).toBe(1.0);
    expect(ticket).toEqual({ jobId: "j1", frames: [0, 12], focusDisparity: 0.61 });
  });

  it("maps error statuses onto typed errors with the server detail", async () => {
    const cases: Array<[number, unknown]> = [
      [400, ServiceError],
      [409, QueueFullError],
      [425, NotReadyError],
    ];
    for (const [status, kind] of cases) {
      const fetchMock = vi.fn(async () => jsonResponse({ detail: `boom ${status}` }, status));
      const client = new ServiceClient("http://svc:8000", fetchMock);
      const err = await client.fetchFrame("c1", 0).then(
        () => null,
        (e: unknown) => e,
      );
      expect(err).toBeInstanceOf(kind as never);
      expect((err as ServiceError).status).toBe(status);
      expect((err as ServiceError).message).toBe(`boom ${status}`);
    }
  });

  it("falls back to the status text when the error body is not JSON", async () => {
    const fetchMock = vi.fn(
      async () => new Response("<html>oops</html>", { status: 500, statusText: "Internal Server Error" }),
    );
    const client = new ServiceClient("http://svc:8000", fetchMock);
    await expect(client.fetchFrame("c1", 0)).rejects.toMatchObject({ status: 500 });
  });

  it("reports health from the liveness endpoint", async () => {
    const ok = new ServiceClient(
      "http://svc:8000",
      vi.fn(async () => new Response("ok", { status: 200 })),
    );
    expect(await ok.health()).toBe(true);
    const down = new ServiceClient(
      "http://svc:8000",
      vi.fn(async () => new Response("nope", { status: 503 })),
    );
    expect(await down.health()).toBe(false);
  });
});
