// Client-side view of a session. The server owns the truth; this is a pure
// state machine over its summaries so a reload rebuilds the identical view.

import type { DeployReport, SessionSummary } from "./api.js";

export type Phase = "idle" | "choosing" | "deploying" | "deployed";

export interface CandidateCard {
  index: number;
  nRepro: number;
  selected: boolean;
}

export interface SessionView {
  sessionId: string | null;
  generation: number;
  phase: Phase;
  cards: CandidateCard[];
  history: number[];
  report: DeployReport | null;
}

export function initialView(): SessionView {
  return { sessionId: null, generation: 0, phase: "idle", cards: [], history: [], report: null };
}

export function viewFromSummary(summary: SessionSummary): SessionView {
  return {
    sessionId: summary.session_id,
    generation: summary.generation,
    phase: summary.deployed ? "deployed" : "choosing",
    cards: summary.candidates.map((c) => ({
      index: c.index,
      nRepro: c.n_repro,
      selected: false,
    })),
    history: [...summary.history],
    report: null,
  };
}

export function markChoice(view: SessionView, index: number): SessionView {
  if (view.phase !== "choosing") {
    throw new Error(`cannot choose in phase ${view.phase}`);
  }
  if (!view.cards.some((c) => c.index === index)) {
    throw new Error(`no candidate ${index}`);
  }
  return {
    ...view,
    cards: view.cards.map((c) => ({ ...c, selected: c.index === index })),
  };
}

export function applyDeploy(view: SessionView, report: DeployReport): SessionView {
  if (view.phase === "deployed") {
    throw new Error("session already deployed");
  }
  return { ...view, phase: "deployed", report };
}

/** Evaluation table rows (total agents, extinction %) from a deploy report. */
export function reportRows(report: DeployReport): string[][] {
  return [
    ["total agents", `${Math.round(report.total_agents_mean)} ± ${Math.round(report.total_agents_std)}`],
    ["extinction %", report.extinction_pct.toFixed(2)],
    ["replicas", String(report.replicas.length)],
  ];
}
