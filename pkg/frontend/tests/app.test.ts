// Unit tests with a scripted fetch: rendering, locking, banners, backoff.

import { describe, expect, it, vi } from "vitest";

import { LabelingClient } from "../src/api";
import { LabelingApp, clusteringDownloadHref, renderPayload } from "../src/app";

type Responder = (method: string, path: string, body?: unknown) => {
  status?: number;
  body: unknown;
};

function fakeFetch(responder: Responder): typeof fetch {
  return (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    const { status = 200, body: payload } = responder(method, path, body);
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => payload,
    } as Response;
  }) as typeof fetch;
}

describe("payload rendering", () => {
  it("renders text payloads as text", () => {
    const el = document.createElement("div");
    renderPayload(el, "a plain description");
    expect(el.querySelector("img")).toBeNull();
    expect(el.textContent).toBe("a plain description");
  });

  it("renders image-suffixed payloads as images", () => {
    const el = document.createElement("div");
    renderPayload(el, "/items/photo.PNG");
    const img = el.querySelector("img");
    expect(img).not.toBeNull();
    expect(img!.getAttribute("src")).toBe("/items/photo.PNG");
  });
});

describe("download link", () => {
  it("embeds the clustering as a data url", () => {
    const href = clusteringDownloadHref({
      clusters: [[0], [1, 2]],
      payload_clusters: [["x"], ["y", "z"]],
      k: 2,
    });
    const parsed = JSON.parse(decodeURIComponent(href.split(",", 2)[1]));
    expect(parsed.clusters).toEqual([[0], [1, 2]]);
  });
});

function pendingView(id: number) {
  return {
    question_id: id,
    leaf_a: 0,
    leaf_b: 1,
    payload_a: `item-${id}-a`,
    payload_b: `item-${id}-b`,
  };
}

describe("optimistic question lock", () => {
  it("never submits a non-pending id and disables buttons until refresh", async () => {
    const submitted: number[] = [];
    let current = 0;
    const client = new LabelingClient(
      "http://svc",
      fakeFetch((method, path, body) => {
        if (path.endsWith("/question")) return { body: pendingView(current) };
        if (path.endsWith("/answer")) {
          submitted.push((body as { question_id: number }).question_id);
          current += 1;
          return {
            body: {
              accepted: true,
              progress: { queries: current, answered: current, clusters: 8, status: "running" },
            },
          };
        }
        if (path.endsWith("/stats")) {
          return { body: { queries: current, answered: current, clusters: 8, status: "running" } };
        }
        if (path.endsWith("/clustering")) {
          return { body: { clusters: [[0], [1]], payload_clusters: [["a"], ["b"]], k: 2 } };
        }
        throw new Error(`unexpected ${method} ${path}`);
      }),
    );
    const root = document.createElement("div");
    const app = new LabelingApp(root, client, "s1", { pollMs: 5 });
    // No pending question rendered yet: clicks are ignored.
    app.el.similar.click();
    await Promise.resolve();
    expect(submitted).toEqual([]);

    app.start();
    await app.nextSettled();
    expect(app.el.similar.disabled).toBe(false);
    app.el.similar.click();
    app.el.similar.click(); // double-click: second must be swallowed
    await app.nextSettled();
    expect(submitted).toEqual([0]);
    app.stop();
  });
});

describe("keyboard shortcuts", () => {
  it("S and D answer like the buttons", async () => {
    const submitted: { id: number; similar: boolean }[] = [];
    let current = 0;
    const client = new LabelingClient(
      "http://svc",
      fakeFetch((method, path, body) => {
        if (path.endsWith("/question")) return { body: pendingView(current) };
        if (path.endsWith("/answer")) {
          const b = body as { question_id: number; similar: boolean };
          submitted.push({ id: b.question_id, similar: b.similar });
          current += 1;
          return {
            body: {
              accepted: true,
              progress: { queries: current, answered: current, clusters: 8, status: "running" },
            },
          };
        }
        if (path.endsWith("/stats")) {
          return { body: { queries: current, answered: current, clusters: 8, status: "running" } };
        }
        if (path.endsWith("/clustering")) {
          return { body: { clusters: [[0]], payload_clusters: [["a"]], k: 1 } };
        }
        throw new Error(`unexpected ${method} ${path}`);
      }),
    );
    const root = document.createElement("div");
    document.body.appendChild(root);
    const app = new LabelingApp(root, client, "s1", { pollMs: 5 });
    app.start();
    await app.nextSettled();
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "s" }));
    await app.nextSettled();
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "D" }));
    await app.nextSettled();
    expect(submitted).toEqual([
      { id: 0, similar: true },
      { id: 1, similar: false },
    ]);
    app.stop();
    root.remove();
  });
});

describe("connection loss", () => {
  it("shows the offline banner and backs off, then recovers", async () => {
    let failing = true;
    const client = new LabelingClient(
      "http://svc",
      fakeFetch((method, path) => {
        if (failing) throw new Error("boom");
        if (path.endsWith("/question")) return { body: { waiting: true } };
        if (path.endsWith("/stats")) {
          return { body: { queries: 0, answered: 0, clusters: 8, status: "running" } };
        }
        if (path.endsWith("/clustering")) {
          return { body: { clusters: [[0]], payload_clusters: [["a"]], k: 1 } };
        }
        throw new Error(`unexpected ${method} ${path}`);
      }),
    );
    const root = document.createElement("div");
    const app = new LabelingApp(root, client, "s1", { pollMs: 5, maxBackoffMs: 20 });
    app.start();
    await app.nextSettled();
    expect(app.el.offlineBanner.classList.contains("hidden")).toBe(false);
    failing = false;
    await app.nextSettled();
    await app.nextSettled();
    expect(app.el.offlineBanner.classList.contains("hidden")).toBe(true);
    app.stop();
  });
});
