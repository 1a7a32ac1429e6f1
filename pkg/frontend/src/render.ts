// Pure HTML renderers for the console views. Every figure rendered here is
// taken verbatim from a service payload; the console computes no metrics of
// its own, which keeps these functions trivially snapshot-testable.

import {
  PairDetail,
  PairRow,
  Report,
  RevisionRow,
  RunState,
  SessionJson,
  nextStage,
} from "./api.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function fmtMean(value: number | null): string {
  return value === null ? "–" : value.toFixed(4);
}

export function fmtP(p: number | null): string {
  if (p === null) return "–";
  return p < 0.001 ? "&lt; .001" : p.toFixed(3);
}

export function validateAlpha(raw: string): number | null {
  const value = Number(raw);
  if (!Number.isFinite(value) || value <= 0 || value >= 1) return null;
  return value;
}

export function validateMu0(raw: string): number | null {
  if (raw.trim() === "") return null;
  const value = Number(raw);
  return Number.isFinite(value) ? value : null;
}

function badge(label: string | null): string {
  if (!label) return "";
  const cls = label === "Typical" ? "badge typical" : "badge atypical";
  return `<span class="${cls}">${escapeHtml(label.toLowerCase())}</span>`;
}

// -- run dashboard -----------------------------------------------------------

const STAGE_ACTIONS: Record<string, string> = {
  classified: "classify",
  inferred: "infer",
  narrated: "narrate",
  refined: "explain",
  evaluated: "evaluate",
};

function stageForm(run: RunState, stage: string): string {
  const action = STAGE_ACTIONS[stage];
  const enabled = nextStage(run.stage) === stage;
  const disabled = enabled ? "" : " disabled";
  const fields: Record<string, string> = {
    classified: `<input name="alpha" type="number" value="0.68" min="0.01" max="0.99" step="0.01" aria-label="alpha"${disabled}>`,
    inferred: "",
    narrated: `<select name="specificity" aria-label="specificity"${disabled}>
        <option value="all" selected>all levels</option>
        <option value="1">1</option><option value="2">2</option><option value="3">3</option>
      </select>`,
    refined: `<select name="backend" aria-label="backend"${disabled}>
        <option value="deterministic" selected>deterministic</option>
        <option value="remote">remote</option>
      </select>`,
    evaluated: `<input name="mu0" type="number" value="0.5" step="0.05" aria-label="mu0"${disabled}>`,
  };
  return `<form class="stage-action" data-run="${escapeHtml(run.corpus_id)}" data-stage="${stage}">
      ${fields[stage]}
      <button type="submit"${disabled}>${action}</button>
    </form>`;
}

export function renderRunRow(run: RunState): string {
  const job = run.job
    ? `<span class="job ${run.job.status}">${escapeHtml(run.job.status)}${
        run.job.error ? ": " + escapeHtml(run.job.error) : ""
      }</span>`
    : "";
  const actions = Object.keys(STAGE_ACTIONS)
    .map((stage) => stageForm(run, stage))
    .join("\n");
  const plans = run.n_plans !== undefined ? String(run.n_plans) : "–";
  return `<tr class="run-row" data-run="${escapeHtml(run.corpus_id)}">
      <td><a href="#/runs/${escapeHtml(run.corpus_id)}">${escapeHtml(run.corpus_id)}</a></td>
      <td>${escapeHtml(run.stage ?? "empty")} ${job}</td>
      <td>${plans}</td>
      <td class="actions">${actions}</td>
    </tr>`;
}

export function renderDashboard(runs: RunState[]): string {
  const rows = runs.map(renderRunRow).join("\n");
  return `<section class="dashboard">
    <h2>Runs</h2>
    <form id="new-run">
      <label>seed <input name="seed" type="number" value="42"></label>
      <label>plans <input name="n" type="number" value="18" min="1"></label>
      <button type="submit">new synthetic run</button>
    </form>
    <table class="runs">
      <thead><tr><th>run</th><th>stage</th><th>plans</th><th>actions</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>
  </section>`;
}

// -- pair grid ----------------------------------------------------------------

export function renderPairGrid(corpusId: string, pairs: PairRow[]): string {
  const rows = pairs
    .map(
      (p) => `<tr class="pair-row" data-pair="${escapeHtml(p.pair_id)}">
      <td><a href="#/runs/${escapeHtml(corpusId)}/pairs/${escapeHtml(p.pair_id)}">${escapeHtml(
        p.pair_id,
      )}</a></td>
      <td>${escapeHtml(p.a)} ${badge(p.a_label)}</td>
      <td>${escapeHtml(p.b)} ${badge(p.b_label)}</td>
      <td>${p.explained ? "explained" : "narrated"}</td>
    </tr>`,
    )
    .join("\n");
  return `<section class="pair-grid">
    <h2>${pairs.length} plan pairs</h2>
    <table><thead><tr><th>pair</th><th>plan A</th><th>plan B</th><th>state</th></tr></thead>
    <tbody>${rows}</tbody></table>
  </section>`;
}

// -- pair detail with refinement chat -------------------------------------------

function renderSession(session: SessionJson | null): string {
  if (!session) return "<p class='empty'>No refinement session yet.</p>";
  const items = session.messages
    .map(
      (m, i) =>
        `<li class="msg ${m.role}"><span class="idx">[${i}]</span> <strong>${m.role}</strong>: ${escapeHtml(
          m.content,
        )}</li>`,
    )
    .join("\n");
  return `<ol class="session">${items}</ol>`;
}

export function renderRevision(revision: RevisionRow): string {
  return `<article class="revision" data-revision="${revision.revision}">
      <header>revision ${revision.revision} · <span class="n-words">${revision.n_words} words</span></header>
      <p>${escapeHtml(revision.text)}</p>
    </article>`;
}

export function renderPairDetail(corpusId: string, detail: PairDetail): string {
  const metrics = detail.metrics
    ? `<dl class="metrics">
        <dt>words</dt><dd class="m-nwords">${detail.metrics.n_words}</dd>
        <dt>reading ease</dt><dd class="m-fres">${detail.metrics.fres.toFixed(2)}</dd>
        <dt>similarity</dt><dd class="m-cosine">${
          detail.metrics.cosine === null ? "–" : detail.metrics.cosine.toFixed(4)
        }</dd>
      </dl>`
    : "<p class='empty'>Not refined yet.</p>";
  const revisions = (detail.revisions ?? []).map(renderRevision).join("\n");
  const levels = [1, 2, 3]
    .map(
      (l) =>
        `<a href="#/runs/${escapeHtml(corpusId)}/pairs/${escapeHtml(detail.pair_id)}?level=${l}" class="${
          l === detail.level ? "level current" : "level"
        }">L${l}</a>`,
    )
    .join(" ");
  return `<section class="pair-detail" data-pair="${escapeHtml(detail.pair_id)}">
    <h2>${escapeHtml(detail.a)} ${badge(detail.a_label)} vs ${escapeHtml(detail.b)} ${badge(
      detail.b_label,
    )}</h2>
    <nav class="levels">specificity: ${levels}</nav>
    <div class="panes">
      <article class="narrative">
        <h3>Narrative <span class="n-words">${detail.narrative_n_words ?? ""} words</span></h3>
        <p>${detail.narrative ? escapeHtml(detail.narrative) : "<em>not narrated</em>"}</p>
      </article>
      <article class="explanation">
        <h3>Explanation</h3>
        ${metrics}
        <div class="revisions">${revisions || "<p class='empty'>No revisions.</p>"}</div>
      </article>
    </div>
    <form id="chat" data-pair="${escapeHtml(detail.pair_id)}" data-level="${detail.level}">
      <input name="request" placeholder="e.g. Make the explanation shorter" autocomplete="off">
      <button type="submit" disabled>send</button>
    </form>
    <details><summary>session transcript</summary>${renderSession(detail.session)}</details>
  </section>`;
}

// -- evaluation table -------------------------------------------------------------

export function renderEvaluationTable(report: Report | undefined): string {
  if (!report) {
    return `<section class="evaluation empty">
      <h2>Evaluation</h2>
      <p>No report yet. Run the evaluate stage to build the summary table.</p>
    </section>`;
  }
  const methods: Array<"baseline" | "refined"> = ["baseline", "refined"];
  const metrics: Array<"n_words" | "fres" | "cosine"> = ["n_words", "fres", "cosine"];
  const cell = (method: string, spec: number, metric: string) =>
    report.cells.find(
      (c) => c.method === method && c.specificity === spec && c.metric === metric,
    ) ?? null;
  const meanRows = methods
    .flatMap((method) =>
      [1, 2, 3].map((spec) => {
        const cells = metrics
          .map((metric) => {
            const c = cell(method, spec, metric);
            return `<td class="mean-cell" data-method="${method}" data-spec="${spec}" data-metric="${metric}">${fmtMean(
              c ? c.mean : null,
            )}</td>`;
          })
          .join("");
        return `<tr><td>${method}</td><td>${spec}</td>${cells}</tr>`;
      }),
    )
    .join("\n");
  const testRows = report.tests
    .map((t) => {
      const significant = t.p !== null && t.p < 0.001;
      return `<tr class="test-row${significant ? " significant" : ""}">
        <td>${t.specificity}</td><td>${escapeHtml(t.metric)}</td>
        <td>${t.t === null ? "–" : t.t.toFixed(3)}</td>
        <td>${t.df === null ? "–" : t.df}</td>
        <td class="p-value">${fmtP(t.p)}</td>
        <td>${t.note ? escapeHtml(t.note) : ""}</td>
      </tr>`;
    })
    .join("\n");
  return `<section class="evaluation">
    <h2>Evaluation (mu0 = ${report.mu0})</h2>
    <table class="means">
      <thead><tr><th>method</th><th>spec</th><th>words</th><th>reading ease</th><th>similarity</th></tr></thead>
      <tbody>${meanRows}</tbody>
    </table>
    <table class="tests">
      <thead><tr><th>spec</th><th>metric</th><th>t</th><th>df</th><th>p</th><th>note</th></tr></thead>
      <tbody>${testRows}</tbody>
    </table>
  </section>`;
}
