import { describe, expect, it } from "vitest";

import { ComposeClient, FetchLike } from "../src/api.js";
import { base64ToBytes, bytesToBase64, encodeGrayPng, pngToMask } from "../src/png.js";
import { cloneRaster, rastersEqual } from "../src/raster.js";
import { LoadedImage, Session } from "../src/session.js";

function pngImage(name: string, width: number, height: number): LoadedImage {
  const gray = new Uint8Array(width * height);
  for (let i = 0; i < gray.length; i++) gray[i] = (i * 7) & 0xff;
  return { name, width, height, pngBase64: bytesToBase64(encodeGrayPng(width, height, gray)) };
}

function json(status: number, body: unknown, headers: Record<string, string> = {}): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json", ...headers },
  });
}

/** Minimal job server: accepts one compose, then reports it done with a
 * canned image. Records submitted payloads for inspection. */
function mockServer(resultImage: string) {
  const payloads: Record<string, unknown>[] = [];
  let jobs = 0;
  const fetchFn: FetchLike = async (url, init) => {
    if (url.endsWith("/v1/compose")) {
      payloads.push(JSON.parse(String(init?.body)) as Record<string, unknown>);
      jobs += 1;
      return json(202, { job_id: `job-${jobs}`, status: "pending" });
    }
    const jobId = url.slice(url.lastIndexOf("/") + 1);
    return json(200, { job_id: jobId, status: "done", image: resultImage });
  };
  return { payloads, fetchFn };
}

function instantClient(fetchFn: FetchLike) {
  return new ComposeClient("http://api.test", { fetchFn, sleep: async () => {} });
}

function readySession(): Session {
  const session = new Session();
  session.setBackground(pngImage("bg.png", 24, 16));
  session.setObject(pngImage("obj.png", 16, 16));
  return session;
}

describe("painting and undo", () => {
  it("mask raster always matches the background dimensions", () => {
    const session = readySession();
    expect(session.mask?.width).toBe(24);
    expect(session.mask?.height).toBe(16);
    session.setBackground(pngImage("other.png", 32, 40));
    expect(session.mask?.width).toBe(32);
    expect(session.mask?.height).toBe(40);
    expect(session.maskIsEmpty()).toBe(true);
  });

  it("undo restores the previous raster bit for bit", () => {
    const session = readySession();
    session.beginStroke();
    session.applyBrushSegment(2, 2, 12, 9, 3);
    const afterFirst = cloneRaster(session.mask!);
    session.beginStroke();
    session.applyRectangle(5, 5, 20, 12);
    expect(rastersEqual(session.mask!, afterFirst)).toBe(false);
    expect(session.undo()).toBe(true);
    expect(rastersEqual(session.mask!, afterFirst)).toBe(true);
    expect(session.undo()).toBe(true);
    expect(session.maskIsEmpty()).toBe(true);
    expect(session.undo()).toBe(false);
  });

  it("erasing everything disables compose again", () => {
    const session = readySession();
    session.beginStroke();
    session.applyRectangle(0, 0, 23, 15);
    expect(session.canSubmit()).toBe(true);
    session.beginStroke();
    session.applyBrushSegment(-2, 8, 26, 8, 20, true); // eraser pass over the whole canvas
    expect(session.maskIsEmpty()).toBe(true);
    expect(session.canSubmit()).toBe(false);
  });

  it("rejects images smaller than the service minimum", () => {
    const session = new Session();
    expect(() => session.setBackground(pngImage("tiny.png", 4, 12))).toThrow(RangeError);
  });
});

describe("compose round-trip against a mocked server", () => {
  it("exports the painted mask losslessly at background resolution", async () => {
    const session = readySession();
    session.beginStroke();
    session.applyBrush(6, 7, 4);
    session.applyRectangle(14, 3, 21, 11);
    const painted = cloneRaster(session.mask!);

    const server = mockServer("cmVzdWx0");
    const entry = await session.submit(instantClient(server.fetchFn));
    expect(entry).not.toBeNull();

    const sent = pngToMask(base64ToBytes(String(server.payloads[0].mask)));
    expect(sent.width).toBe(24);
    expect(sent.height).toBe(16);
    expect(rastersEqual(sent, painted)).toBe(true);
    expect(server.payloads[0].mask_level).toBe(session.maskLevel);
  });

  it("displays exactly what the server returned", async () => {
    const session = readySession();
    session.beginStroke();
    session.applyRectangle(2, 2, 9, 9);
    const background = session.background!.pngBase64;

    // a server that echoes the background back as the composite
    const server = mockServer(background);
    const entry = await session.submit(instantClient(server.fetchFn));
    expect(entry?.image).toBe(background);
    expect(session.history[0].image).toBe(background);
    expect(session.lastJobId).toBe("job-1");
    expect(session.lastError).toBeNull();
  });

  it("keeps one history entry per submission, in order", async () => {
    const session = readySession();
    const server = mockServer("cmVzdWx0");
    const client = instantClient(server.fetchFn);

    session.beginStroke();
    session.applyRectangle(0, 0, 5, 5);
    const maskA = cloneRaster(session.mask!);
    await session.submit(client);

    session.beginStroke();
    session.applyRectangle(10, 10, 20, 14);
    const maskB = cloneRaster(session.mask!);
    await session.submit(client);

    expect(session.history.length).toBe(2);
    expect(rastersEqual(session.history[0].mask, maskA)).toBe(true);
    expect(rastersEqual(session.history[1].mask, maskB)).toBe(true);
    expect(session.history[0].jobId).toBe("job-1");
    expect(session.history[1].jobId).toBe("job-2");
  });

  it("history snapshots are immune to later painting", async () => {
    const session = readySession();
    const server = mockServer("cmVzdWx0");
    session.beginStroke();
    session.applyRectangle(0, 0, 5, 5);
    await session.submit(instantClient(server.fetchFn));
    const snapshot = cloneRaster(session.history[0].mask);
    session.beginStroke();
    session.applyRectangle(0, 0, 23, 15);
    expect(rastersEqual(session.history[0].mask, snapshot)).toBe(true);
  });
});

describe("submission guards", () => {
  it("an empty mask never reaches the network", async () => {
    const session = readySession();
    let requests = 0;
    const client = instantClient(async () => { requests += 1; return json(500, {}); });

    expect(session.canSubmit()).toBe(false);
    const entry = await session.submit(client);
    expect(entry).toBeNull();
    expect(requests).toBe(0);
    expect(session.lastError).toEqual(
      { kind: "field", field: "mask", message: "paint a mask before composing" });
    expect(session.history.length).toBe(0);
  });

  it("allows only one job in flight", async () => {
    const session = readySession();
    session.beginStroke();
    session.applyRectangle(0, 0, 9, 9);

    let release!: () => void;
    const gate = new Promise<void>((resolve) => { release = resolve; });
    const fetchFn: FetchLike = async (url) => {
      if (url.endsWith("/v1/compose")) return json(202, { job_id: "job-1", status: "pending" });
      await gate;
      return json(200, { job_id: "job-1", status: "done", image: "cmVzdWx0" });
    };
    const client = instantClient(fetchFn);

    const first = session.submit(client);
    expect(session.inFlight).toBe(true);
    expect(session.canSubmit()).toBe(false);
    const second = await session.submit(client);
    expect(second).toBeNull();
    expect(session.lastError?.kind).toBe("toast");

    release();
    expect(await first).not.toBeNull();
    expect(session.inFlight).toBe(false);
    expect(session.history.length).toBe(1);
  });
});

describe("server error surfaces", () => {
  function sessionWithMask(): Session {
    const session = readySession();
    session.beginStroke();
    session.applyRectangle(1, 1, 8, 8);
    return session;
  }

  it("a field rejection becomes an inline error and no history entry", async () => {
    const session = sessionWithMask();
    const client = instantClient(async () =>
      json(422, { detail: { field: "mask", error: "mask is empty" } }));
    const entry = await session.submit(client);
    expect(entry).toBeNull();
    expect(session.lastError).toEqual({ kind: "field", field: "mask", message: "mask is empty" });
    expect(session.history.length).toBe(0);
    expect(session.inFlight).toBe(false);
  });

  it("a full queue becomes a retry hint", async () => {
    const session = sessionWithMask();
    const client = instantClient(async () =>
      json(429, { detail: "compose queue is full" }, { "retry-after": "1" }));
    await session.submit(client);
    expect(session.lastError?.kind).toBe("busy");
    expect(session.lastError && "retryAfterSeconds" in session.lastError
      ? session.lastError.retryAfterSeconds : 0).toBe(1);
  });

  it("a transport failure becomes a toast", async () => {
    const session = sessionWithMask();
    const client = instantClient(async () => { throw new TypeError("fetch failed"); });
    await session.submit(client);
    expect(session.lastError?.kind).toBe("toast");
    expect(session.history.length).toBe(0);
  });
});
