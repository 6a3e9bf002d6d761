// Single-session labeling view: question screen + progress panel.
//
// All state lives server-side; this component only polls, renders, and
// submits answers with an optimistic lock on the pending question id, so
// a browser refresh (or a lost race against another tab) never loses or
// duplicates an answer.

import {
  ClusteringView,
  LabelingClient,
  PendingQuestion,
  StaleQuestionError,
  isDone,
  isPending,
} from "./api";

export interface AppOptions {
  pollMs?: number;
  maxBackoffMs?: number;
}

const IMAGE_EXTENSIONS = [".png", ".jpg", ".jpeg", ".gif", ".webp", ".svg"];

export function renderPayload(container: HTMLElement, payload: string): void {
  container.textContent = "";
  const lower = payload.toLowerCase();
  if (IMAGE_EXTENSIONS.some((ext) => lower.endsWith(ext))) {
    const img = document.createElement("img");
    img.src = payload;
    img.alt = payload;
    container.appendChild(img);
  } else {
    const span = document.createElement("span");
    span.textContent = payload;
    container.appendChild(span);
  }
}

export function clusteringDownloadHref(clustering: ClusteringView): string {
  const body = JSON.stringify(
    { clusters: clustering.clusters, payload_clusters: clustering.payload_clusters },
    null,
    2,
  );
  return "data:application/json;charset=utf-8," + encodeURIComponent(body);
}

export class LabelingApp {
  private pending: PendingQuestion | null = null;
  private awaitingNext = false; // answered; buttons stay disabled until a new id
  private stopped = false;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private backoffMs: number;
  private readonly pollMs: number;
  private readonly maxBackoffMs: number;
  private onSettled: (() => void)[] = [];

  readonly el: {
    root: HTMLElement;
    questionScreen: HTMLElement;
    payloadA: HTMLElement;
    payloadB: HTMLElement;
    similar: HTMLButtonElement;
    dissimilar: HTMLButtonElement;
    staleBanner: HTMLElement;
    offlineBanner: HTMLElement;
    doneScreen: HTMLElement;
    clusterSummary: HTMLElement;
    download: HTMLAnchorElement;
    statAnswered: HTMLElement;
    statQueries: HTMLElement;
    statClusters: HTMLElement;
    histogram: HTMLElement;
  };

  constructor(
    root: HTMLElement,
    private client: LabelingClient,
    private sessionId: string,
    opts: AppOptions = {},
  ) {
    this.pollMs = opts.pollMs ?? 1000;
    this.maxBackoffMs = opts.maxBackoffMs ?? 10_000;
    this.backoffMs = this.pollMs;
    root.innerHTML = `
      <div class="stale-banner banner hidden">That question was already answered; loading the next one.</div>
      <div class="offline-banner banner hidden">Connection lost; retrying…</div>
      <section class="question-screen hidden">
        <div class="pair">
          <div class="payload payload-a"></div>
          <div class="payload payload-b"></div>
        </div>
        <div class="buttons">
          <button class="similar">Similar (S)</button>
          <button class="dissimilar">Dissimilar (D)</button>
        </div>
      </section>
      <section class="done-screen hidden">
        <h2>Session complete</h2>
        <p class="cluster-summary"></p>
        <a class="download" download="clustering.json">Download clustering</a>
      </section>
      <aside class="progress-panel">
        <span class="stat stat-answered">0</span> answered ·
        <span class="stat stat-queries">0</span> queries ·
        <span class="stat stat-clusters">-</span> clusters
        <div class="histogram"></div>
      </aside>`;
    const q = (sel: string) => root.querySelector(sel) as HTMLElement;
    this.el = {
      root,
      questionScreen: q(".question-screen"),
      payloadA: q(".payload-a"),
      payloadB: q(".payload-b"),
      similar: root.querySelector(".similar") as HTMLButtonElement,
      dissimilar: root.querySelector(".dissimilar") as HTMLButtonElement,
      staleBanner: q(".stale-banner"),
      offlineBanner: q(".offline-banner"),
      doneScreen: q(".done-screen"),
      clusterSummary: q(".cluster-summary"),
      download: root.querySelector(".download") as HTMLAnchorElement,
      statAnswered: q(".stat-answered"),
      statQueries: q(".stat-queries"),
      statClusters: q(".stat-clusters"),
      histogram: q(".histogram"),
    };
    this.el.similar.addEventListener("click", () => void this.submit(true));
    this.el.dissimilar.addEventListener("click", () => void this.submit(false));
    root.ownerDocument.addEventListener("keydown", (ev) => {
      const key = ev.key.toLowerCase();
      if (key === "s") void this.submit(true);
      if (key === "d") void this.submit(false);
    });
    this.setButtonsEnabled(false);
  }

  start(): void {
    void this.tick();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
  }

  /** Resolves after the next poll cycle settles (test hook). */
  nextSettled(): Promise<void> {
    return new Promise((resolve) => this.onSettled.push(resolve));
  }

  private settle(): void {
    const waiters = this.onSettled;
    this.onSettled = [];
    for (const w of waiters) w();
  }

  private schedule(delay: number): void {
    if (this.stopped) return;
    this.timer = setTimeout(() => void this.tick(), delay);
  }

  private async tick(): Promise<void> {
    if (this.stopped) return;
    try {
      const view = await this.client.question(this.sessionId);
      this.el.offlineBanner.classList.add("hidden");
      this.backoffMs = this.pollMs;
      if (isDone(view)) {
        this.renderDone(view.clustering);
        await this.refreshProgress();
        this.settle();
        return; // terminal: no more polling
      }
      if (isPending(view)) {
        this.renderQuestion(view);
      }
      await this.refreshProgress();
      this.settle();
      this.schedule(this.pollMs);
    } catch (err) {
      this.el.offlineBanner.classList.remove("hidden");
      this.backoffMs = Math.min(this.backoffMs * 2, this.maxBackoffMs);
      this.settle();
      this.schedule(this.backoffMs);
    }
  }

  private renderQuestion(question: PendingQuestion): void {
    const isNew = this.pending === null || this.pending.question_id !== question.question_id;
    this.pending = question;
    this.el.questionScreen.classList.remove("hidden");
    if (isNew) {
      renderPayload(this.el.payloadA, question.payload_a);
      renderPayload(this.el.payloadB, question.payload_b);
      this.awaitingNext = false;
      this.setButtonsEnabled(true);
    }
  }

  private renderDone(clustering: ClusteringView): void {
    this.pending = null;
    this.el.questionScreen.classList.add("hidden");
    this.el.doneScreen.classList.remove("hidden");
    const sizes = clustering.clusters.map((c) => c.length);
    this.el.clusterSummary.textContent = `${clustering.k} clusters (sizes ${sizes.join(", ")})`;
    this.el.download.href = clusteringDownloadHref(clustering);
    this.renderHistogram(sizes);
    this.el.statClusters.textContent = String(clustering.k);
  }

  private setButtonsEnabled(enabled: boolean): void {
    this.el.similar.disabled = !enabled;
    this.el.dissimilar.disabled = !enabled;
  }

  async submit(similar: boolean): Promise<void> {
    // Optimistic lock: only ever submit the id currently on screen, and
    // never while a previous answer is still in flight or unrefreshed.
    if (this.pending === null || this.awaitingNext) return;
    const questionId = this.pending.question_id;
    this.awaitingNext = true;
    this.setButtonsEnabled(false);
    try {
      const result = await this.client.answer(this.sessionId, questionId, similar);
      // An accepted answer clears any leftover lost-race notice.
      this.el.staleBanner.classList.add("hidden");
      this.el.statAnswered.textContent = String(result.progress.answered);
      this.el.statQueries.textContent = String(result.progress.queries);
      this.el.statClusters.textContent = String(result.progress.clusters);
    } catch (err) {
      if (err instanceof StaleQuestionError) {
        this.el.staleBanner.classList.remove("hidden");
      } else {
        this.el.offlineBanner.classList.remove("hidden");
        this.awaitingNext = false; // allow a retry of the same question
        this.setButtonsEnabled(true);
        return;
      }
    }
    // Fetch the follow-up state immediately rather than waiting a poll.
    if (this.timer !== null) clearTimeout(this.timer);
    await this.tick();
  }

  private async refreshProgress(): Promise<void> {
    const [stats, clustering] = await Promise.all([
      this.client.stats(this.sessionId),
      this.client.clustering(this.sessionId),
    ]);
    this.el.statAnswered.textContent = String(stats.answered);
    this.el.statQueries.textContent = String(stats.queries);
    this.el.statClusters.textContent = String(stats.clusters);
    this.renderHistogram(clustering.clusters.map((c) => c.length));
  }

  private renderHistogram(sizes: number[]): void {
    const counts = new Map<number, number>();
    for (const s of sizes) counts.set(s, (counts.get(s) ?? 0) + 1);
    this.el.histogram.textContent = "";
    const entries = [...counts.entries()].sort((a, b) => a[0] - b[0]);
    for (const [size, count] of entries) {
      const row = document.createElement("div");
      row.className = "histogram-row";
      row.dataset.size = String(size);
      row.textContent = `size ${size}: ${"#".repeat(Math.min(count, 60))} ${count}`;
      this.el.histogram.appendChild(row);
    }
  }
}
