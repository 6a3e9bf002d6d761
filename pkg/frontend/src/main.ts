// Entry point: attach to an existing session (?session=ID) or show a tiny
// session-creation form.  The service base URL defaults to same-origin.

import { LabelingClient } from "./api";
import { LabelingApp } from "./app";

function mountApp(root: HTMLElement, client: LabelingClient, sessionId: string): void {
  const app = new LabelingApp(root, client, sessionId);
  app.start();
}

function mountCreateForm(root: HTMLElement, client: LabelingClient): void {
  root.innerHTML = `
    <section class="create-form">
      <h2>Start a labeling session</h2>
      <label>Algorithm
        <select class="algorithm">
          <option value="nwdp">nwdp</option>
          <option value="wdp">wdp</option>
          <option value="nr">nr</option>
          <option value="bf">bf</option>
        </select>
      </label>
      <label>Tree JSON
        <textarea class="tree-json" rows="8" placeholder='{"n": 2, "nodes": [...], "payloads": [...]}'></textarea>
      </label>
      <button class="create">Create session</button>
      <div class="create-error banner hidden"></div>
    </section>`;
  const button = root.querySelector(".create") as HTMLButtonElement;
  const errorBox = root.querySelector(".create-error") as HTMLElement;
  button.addEventListener("click", async () => {
    errorBox.classList.add("hidden");
    try {
      const tree = JSON.parse((root.querySelector(".tree-json") as HTMLTextAreaElement).value);
      const algorithm = (root.querySelector(".algorithm") as HTMLSelectElement).value;
      const { id } = await client.createSession(tree, algorithm);
      const url = new URL(window.location.href);
      url.searchParams.set("session", id);
      window.history.replaceState(null, "", url.toString());
      mountApp(root, client, id);
    } catch (err) {
      errorBox.textContent = String(err);
      errorBox.classList.remove("hidden");
    }
  });
}

export function bootstrap(root: HTMLElement): void {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("base") ?? "";
  const client = new LabelingClient(base);
  const sessionId = params.get("session");
  if (sessionId) {
    mountApp(root, client, sessionId);
  } else {
    mountCreateForm(root, client);
  }
}

const rootEl = document.getElementById("app");
if (rootEl) {
  bootstrap(rootEl);
}
