/**
 * Live counts panel: repeated fixed-interval acquisitions drawn as a strip
 * chart. Each bar is one record's coincidence count with a ±√N whisker —
 * the whisker is chart geometry on the server's number, nothing more.
 *
 * The acquire control is disabled while a request is in flight, mirroring
 * the server's one-acquisition-at-a-time rule.
 */

import { degrees } from "../format.js";
import type { CountRecordFields } from "../api.js";
import type { BenchState } from "../state.js";

const CHART_W = 640;
const CHART_H = 160;
const PAD = 8;

function stripChart(history: CountRecordFields[]): string {
  if (history.length === 0) {
    return `<p class="placeholder">no acquisitions yet</p>`;
  }
  const top = Math.max(...history.map((r) => r.n_coinc + Math.sqrt(r.n_coinc)), 1);
  const scaleY = (value: number) => CHART_H - PAD - (value / top) * (CHART_H - 2 * PAD);
  const slot = (CHART_W - 2 * PAD) / history.length;
  const marks = history.map((record, i) => {
    const x = (PAD + slot * (i + 0.5)).toFixed(1);
    const y = scaleY(record.n_coinc).toFixed(1);
    const err = Math.sqrt(record.n_coinc);
    const yLo = scaleY(Math.max(record.n_coinc - err, 0)).toFixed(1);
    const yHi = scaleY(record.n_coinc + err).toFixed(1);
    return (
      `<line class="whisker" x1="${x}" y1="${yLo}" x2="${x}" y2="${yHi}"/>` +
      `<circle class="mark" cx="${x}" cy="${y}" r="3">` +
      `<title>N = ${record.n_coinc} at (${record.alpha}, ${record.beta})</title></circle>`
    );
  });
  return `<svg id="strip-chart" viewBox="0 0 ${CHART_W} ${CHART_H}" role="img"
       aria-label="coincidence counts per acquisition">
    <line class="axis" x1="${PAD}" y1="${CHART_H - PAD}" x2="${CHART_W - PAD}" y2="${CHART_H - PAD}"/>
    ${marks.join("\n    ")}
  </svg>`;
}

export function countsPanel(state: BenchState): string {
  const noSession = state.sessionId === null;
  const acquireDisabled = noSession || state.busy ? " disabled" : "";
  const toggleDisabled = noSession ? " disabled" : "";
  const latest = state.history[state.history.length - 1];
  const readout = latest
    ? `N = ${latest.n_coinc} coincidences in ${latest.duration_s} s at ` +
      `α = ${degrees(latest.alpha)}, β = ${degrees(latest.beta)} ` +
      `(singles ${latest.n_a} / ${latest.n_b})`
    : "—";
  const checked = state.continuous ? " checked" : "";
  return `<section class="panel" id="panel-counts">
  <h2>Live counts</h2>
  <p class="readout" id="count-readout">${readout}</p>
  ${stripChart(state.history)}
  <div class="controls">
    <button id="acquire-once"${acquireDisabled}>acquire</button>
    <label><input type="checkbox" id="run-continuously"${checked}${toggleDisabled}> run continuously</label>
  </div>
</section>`;
}
