// Interactive evolution UI: a candidate grid with looping Petri playbacks,
// click-to-choose, a history strip, and a deployment report viewer.

import { SessionApi } from "./api.js";
import { FramePlayer, SharedClock } from "./player.js";
import {
  SessionView,
  applyDeploy,
  initialView,
  markChoice,
  reportRows,
  viewFromSummary,
} from "./state.js";

export class App {
  private api: SessionApi;
  private view: SessionView = initialView();
  private clock = new SharedClock();
  private root: HTMLElement;
  private busy = false; // at most one in-flight choice per session

  constructor(root: HTMLElement, baseUrl: string) {
    this.root = root;
    this.api = new SessionApi(baseUrl);
    this.renderShell();
  }

  // --- wiring ---------------------------------------------------------------

  private el<K extends keyof HTMLElementTagNameMap>(
    tag: K, cls?: string, text?: string,
  ): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    if (cls) node.className = cls;
    if (text !== undefined) node.textContent = text;
    return node;
  }

  private renderShell(): void {
    this.root.innerHTML = "";
    const controls = this.el("div", "controls");
    const presetSel = this.el("select");
    presetSel.id = "preset";
    for (const p of ["pestilence", "persistence", "collaboration", "sideways"]) {
      const opt = this.el("option", undefined, p);
      opt.value = p;
      presetSel.appendChild(opt);
    }
    const mutatorSel = this.el("select");
    mutatorSel.id = "mutator";
    for (const m of ["basic", "adaptive"]) {
      const opt = this.el("option", undefined, m);
      opt.value = m;
      mutatorSel.appendChild(opt);
    }
    const startBtn = this.el("button", "start-btn", "Start session");
    startBtn.id = "start";
    startBtn.addEventListener("click", () => void this.start());
    const deployBtn = this.el("button", "deploy-btn", "Deploy");
    deployBtn.id = "deploy";
    deployBtn.addEventListener("click", () => void this.deploy());
    const status = this.el("span", "status");
    status.id = "status";
    controls.append(presetSel, mutatorSel, startBtn, deployBtn, status);

    this.root.append(
      controls,
      this.el("div", "history-strip"),
      this.el("div", "candidate-grid"),
      this.el("div", "deploy-panel"),
    );
    this.refreshGrid();
  }

  private setStatus(text: string): void {
    const node = this.root.querySelector("#status");
    if (node) node.textContent = text;
  }

  // --- actions ----------------------------------------------------------------

  async start(): Promise<void> {
    const preset = (this.root.querySelector("#preset") as HTMLSelectElement)?.value;
    const mutator = (this.root.querySelector("#mutator") as HTMLSelectElement)?.value;
    this.setStatus("starting session…");
    const id = await this.api.startSession({
      preset,
      mutator,
      n_candidates: 8,
      seed: Math.floor(Math.random() * 1e9),
    });
    await this.loadSession(id);
  }

  /** Rebuild the whole view from the server (also used on page reload). */
  async loadSession(id: string): Promise<void> {
    const summary = await this.api.getSession(id);
    this.view = viewFromSummary(summary);
    window.location.hash = `session=${id}`;
    this.setStatus(`generation ${this.view.generation}`);
    await this.refreshGrid();
  }

  async pick(index: number): Promise<void> {
    if (this.busy || this.view.phase !== "choosing" || !this.view.sessionId) return;
    const sid = this.view.sessionId;
    this.busy = true;
    try {
      this.view = markChoice(this.view, index);
      this.highlightSelection();
      const summary = await this.api.choose(sid, index);
      this.view = viewFromSummary(summary);
      this.setStatus(`generation ${this.view.generation}`);
      await this.refreshGrid();
    } finally {
      this.busy = false;
    }
  }

  dispose(): void {
    this.clock.stop();
    this.clock.clear();
  }

  async deploy(): Promise<void> {
    if (!this.view.sessionId || this.view.phase !== "choosing") return;
    this.setStatus("deploying…");
    const resp = await this.api.deploy(this.view.sessionId, {
      width: 96, height: 48, steps: 1000, reps: 16,
    });
    this.view = applyDeploy(this.view, resp.report);
    this.renderDeploy(resp);
    this.setStatus("deployed");
  }

  // --- rendering -----------------------------------------------------------------

  private highlightSelection(): void {
    for (const card of this.root.querySelectorAll(".candidate-card")) {
      const idx = Number((card as HTMLElement).dataset.index);
      card.classList.toggle(
        "selected",
        this.view.cards.find((c) => c.index === idx)?.selected ?? false,
      );
    }
  }

  private async refreshGrid(): Promise<void> {
    const grid = this.root.querySelector(".candidate-grid") as HTMLElement;
    const strip = this.root.querySelector(".history-strip") as HTMLElement;
    if (!grid || !strip) return;
    grid.innerHTML = "";
    strip.textContent = this.view.history.length
      ? `choices: ${this.view.history.join(" → ")}`
      : "";
    this.clock.stop();
    this.clock.clear();
    if (!this.view.sessionId || this.view.cards.length === 0) {
      grid.appendChild(this.el("p", "placeholder", "No session yet — start one."));
      return;
    }
    for (const card of this.view.cards) {
      const node = this.el("div", "candidate-card");
      node.dataset.index = String(card.index);
      const payload = await this.api.getFrames(this.view.sessionId, card.index);
      const player = new FramePlayer(payload);
      this.clock.add(player);
      node.appendChild(player.canvas);
      const badge = this.el("div", "n-repr-badge", `N repr: ${card.nRepro}`);
      node.appendChild(badge);
      node.addEventListener("click", () => void this.pick(card.index));
      grid.appendChild(node);
    }
    this.clock.start();
  }

  private renderDeploy(resp: { report: any; replay?: any }): void {
    const panel = this.root.querySelector(".deploy-panel") as HTMLElement;
    panel.innerHTML = "";
    const table = this.el("table", "deploy-report");
    for (const [label, value] of reportRows(resp.report)) {
      const tr = this.el("tr");
      tr.append(this.el("td", undefined, label), this.el("td", undefined, value));
      table.appendChild(tr);
    }
    panel.appendChild(table);
    if (resp.replay && resp.replay.frames?.length) {
      const player = new FramePlayer(resp.replay);
      player.canvas.classList.add("deploy-replay");
      panel.appendChild(player.canvas);
      this.clock.add(player);
      this.clock.start();
    }
  }
}

export function mount(root: HTMLElement, baseUrl = ""): App {
  const app = new App(root, baseUrl);
  const match = window.location.hash.match(/session=([0-9a-f]+)/);
  if (match) void app.loadSession(match[1]);
  return app;
}

declare global {
  interface Window {
    greengridApp?: App;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  window.greengridApp = mount(document.getElementById("app") as HTMLElement);
}
