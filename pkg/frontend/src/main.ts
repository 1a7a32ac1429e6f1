// Browser shell: hash routing, service calls, event wiring. All rendering is
// delegated to the pure functions in render.ts.

import { ApiClient, ApiError, PairDetail } from "./api.js";
import {
  renderDashboard,
  renderEvaluationTable,
  renderPairDetail,
  renderPairGrid,
  validateAlpha,
  validateMu0,
} from "./render.js";

declare global {
  interface Window {
    PLANEXP_API?: string;
  }
}

function serviceUrl(): string {
  const stored = localStorage.getItem("planexp.api");
  return window.PLANEXP_API ?? stored ?? "http://127.0.0.1:8970";
}

const app = document.getElementById("app")!;
const banner = document.getElementById("banner")!;
let api = new ApiClient(serviceUrl());
let pendingFollowup = false;

function showError(message: string) {
  banner.textContent = message;
  banner.classList.add("visible");
}

function clearError() {
  banner.textContent = "";
  banner.classList.remove("visible");
}

async function guard<T>(work: () => Promise<T>): Promise<T | null> {
  try {
    const result = await work();
    clearError();
    return result;
  } catch (err) {
    if (err instanceof ApiError) {
      showError(err.message);
    } else {
      showError(`service unreachable at ${api.baseUrl} — check the URL and retry`);
    }
    return null;
  }
}

// -- routing ------------------------------------------------------------------

interface Route {
  view: "dashboard" | "run" | "pair";
  corpusId?: string;
  pairId?: string;
  level: number;
}

export function parseRoute(hash: string): Route {
  const [path, query] = hash.replace(/^#/, "").split("?");
  const level = Number(new URLSearchParams(query ?? "").get("level") ?? "3") || 3;
  const parts = path.split("/").filter(Boolean);
  if (parts[0] === "runs" && parts.length === 2) {
    return { view: "run", corpusId: parts[1], level };
  }
  if (parts[0] === "runs" && parts[2] === "pairs" && parts.length === 4) {
    return { view: "pair", corpusId: parts[1], pairId: parts[3], level };
  }
  return { view: "dashboard", level };
}

async function render() {
  const route = parseRoute(location.hash);
  if (route.view === "dashboard") {
    const runs = await guard(() => api.listRuns());
    if (runs) app.innerHTML = renderDashboard(runs);
  } else if (route.view === "run" && route.corpusId) {
    const run = await guard(() => api.getRun(route.corpusId!));
    if (!run) return;
    const pairs = (await guard(() => api.pairs(route.corpusId!))) ?? [];
    app.innerHTML =
      renderDashboard([run]) +
      renderEvaluationTable(run.report) +
      renderPairGrid(route.corpusId, pairs);
  } else if (route.view === "pair" && route.corpusId && route.pairId) {
    const detail = await guard(() => api.pairDetail(route.corpusId!, route.pairId!, route.level));
    if (detail) {
      app.innerHTML = renderPairDetail(route.corpusId, detail);
      wireChat(route.corpusId, detail);
    }
  }
}

// -- event wiring ----------------------------------------------------------------

function stageParams(stage: string, form: HTMLFormElement): Record<string, unknown> | null {
  const data = new FormData(form);
  if (stage === "classified") {
    const alpha = validateAlpha(String(data.get("alpha") ?? ""));
    if (alpha === null) {
      showError("alpha must lie strictly between 0 and 1");
      return null;
    }
    return { alpha };
  }
  if (stage === "narrated") {
    const spec = String(data.get("specificity") ?? "all");
    return { specificity: spec === "all" ? "all" : Number(spec) };
  }
  if (stage === "refined") {
    return { backend: String(data.get("backend") ?? "deterministic") };
  }
  if (stage === "evaluated") {
    const mu0 = validateMu0(String(data.get("mu0") ?? ""));
    if (mu0 === null) {
      showError("mu0 must be a number");
      return null;
    }
    return { mu0 };
  }
  return {};
}

async function pollRefinement(corpusId: string) {
  for (let i = 0; i < 600; i++) {
    const state = await guard(() => api.getRun(corpusId));
    if (!state) return;
    if (state.job?.status === "failed") {
      showError(`refinement failed: ${state.job.error}`);
      return;
    }
    if (state.stage === "refined") {
      await render();
      return;
    }
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
}

document.addEventListener("submit", async (event) => {
  const form = event.target as HTMLFormElement;
  if (form.id === "new-run") {
    event.preventDefault();
    const data = new FormData(form);
    const state = await guard(() =>
      api.createGenerated(Number(data.get("seed") ?? 42), Number(data.get("n") ?? 18)),
    );
    if (state) location.hash = `#/runs/${state.corpus_id}`;
    await render();
    return;
  }
  if (form.classList.contains("stage-action")) {
    event.preventDefault();
    const corpusId = form.dataset.run!;
    const stage = form.dataset.stage!;
    const params = stageParams(stage, form);
    if (params === null) return;
    const state = await guard(() => api.advance(corpusId, stage, params));
    if (state && stage === "refined") {
      await render();
      await pollRefinement(corpusId);
    } else {
      await render();
    }
  }
});

function wireChat(corpusId: string, detail: PairDetail) {
  const form = document.getElementById("chat") as HTMLFormElement | null;
  if (!form) return;
  const input = form.querySelector("input[name=request]") as HTMLInputElement;
  const button = form.querySelector("button") as HTMLButtonElement;
  const sync = () => {
    button.disabled = pendingFollowup || input.value.trim() === "";
  };
  input.addEventListener("input", sync);
  sync();
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const request = input.value.trim();
    if (!request || pendingFollowup) return;
    pendingFollowup = true;
    sync();
    const response = await guard(() =>
      api.followup(corpusId, detail.pair_id, request, detail.level),
    );
    pendingFollowup = false;
    if (response) {
      app.innerHTML = renderPairDetail(corpusId, response.detail);
      wireChat(corpusId, response.detail);
    } else {
      sync();
    }
  });
}

// -- bootstrap ---------------------------------------------------------------------

const urlForm = document.getElementById("service-url") as HTMLFormElement | null;
if (urlForm) {
  const field = urlForm.querySelector("input")!;
  field.value = serviceUrl();
  urlForm.addEventListener("submit", (event) => {
    event.preventDefault();
    localStorage.setItem("planexp.api", field.value.trim());
    api = new ApiClient(field.value.trim());
    void render();
  });
}

window.addEventListener("hashchange", () => void render());
void render();
