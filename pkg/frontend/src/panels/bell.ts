/**
 * Bell wizard panel: run the 16-setting CHSH protocol in one click, record
 * the settings by hand, or load a saved count table. The table of counts is
 * laid out like the classic published run — analyzer α down the side, β
 * across the top — and the verdict line reports S against the CHSH bound.
 *
 * Loaded CSV text goes to the server verbatim; the client never parses or
 * refits counts itself.
 */

import { compactAngle, escapeHtml, plusMinus, shortDigest, signed, verdict } from "../format.js";
import type { CountRecordFields } from "../api.js";
import type { BenchState } from "../state.js";

function uniqueSorted(values: number[]): number[] {
  return [...new Set(values)].sort((x, y) => x - y);
}

function countsTable(records: CountRecordFields[]): string {
  if (records.length === 0) return "";
  const alphas = uniqueSorted(records.map((r) => r.alpha));
  const betas = uniqueSorted(records.map((r) => r.beta));
  const byCell = new Map<string, number>();
  for (const record of records) {
    byCell.set(`${record.alpha}|${record.beta}`, record.n_coinc);
  }
  const head = betas.map((b) => `<th>β = ${compactAngle(b)}°</th>`).join("");
  const rows = alphas.map((a) => {
    const cells = betas
      .map((b) => {
        const count = byCell.get(`${a}|${b}`);
        return `<td>${count === undefined ? "·" : count}</td>`;
      })
      .join("");
    return `<tr><th>α = ${compactAngle(a)}°</th>${cells}</tr>`;
  });
  return `<table id="bell-table">
    <thead><tr><th>N</th>${head}</tr></thead>
    <tbody>${rows.join("")}</tbody>
  </table>`;
}

function resultBlock(state: BenchState): string {
  const result = state.bell.result;
  if (result === null) return "";
  const lines = [
    ["E(a, b)", result.e_ab],
    ["E(a, b′)", result.e_abp],
    ["E(a′, b)", result.e_apb],
    ["E(a′, b′)", result.e_apbp],
  ] as const;
  const eRows = lines
    .map(([label, value]) => `<tr><td>${label}</td><td>${signed(value)}</td></tr>`)
    .join("");
  return `<div class="bell-result" id="bell-result">
    <table class="correlations"><tbody>${eRows}</tbody></table>
    <p class="headline">S = ${plusMinus(result.s_value, result.sigma_s)}</p>
    <p class="verdict">${verdict(result.s_value, result.significance)}</p>
    <p class="digest">inputs ${shortDigest(result.inputs_digest)}</p>
  </div>`;
}

export function bellPanel(state: BenchState): string {
  const disabled = state.sessionId === null || state.busy ? " disabled" : "";
  const analyzeDisabled = state.bell.staged.length === 0 || state.busy ? " disabled" : "";
  const csvDisabled = state.busy ? " disabled" : "";
  const staged = state.bell.staged;
  const stagedNote =
    staged.length > 0
      ? `<p class="readout">${staged.length} setting${staged.length === 1 ? "" : "s"} recorded by hand</p>`
      : "";
  const warning =
    state.bell.warning === null
      ? ""
      : `<p class="warning" id="bell-warning">${escapeHtml(state.bell.warning)}</p>`;
  const tabulated = staged.length > 0 ? staged : state.bell.tabulated;
  return `<section class="panel" id="panel-bell">
  <h2>Bell test</h2>
  <div class="controls">
    <button id="bell-auto"${disabled}>auto-run 16 settings</button>
    <button id="bell-record"${disabled}>record this setting</button>
    <button id="bell-analyze"${analyzeDisabled}>analyze recorded</button>
    <button id="bell-clear">clear</button>
  </div>
  <label class="csv-load">load a saved count table (CSV)
    <input type="file" id="csv-file" accept=".csv,text/csv"${csvDisabled}>
  </label>
  ${stagedNote}
  ${warning}
  ${countsTable(tabulated)}
  ${resultBlock(state)}
</section>`;
}
