/**
 * Tuning exercise panel: the guided two-step alignment from the bench
 * procedure. Step one, turn theta_l until the (0,0) and (90,90) coincidence
 * counts agree; step two, turn phi_l to maximize the (45,45) count. The
 * panel samples the characterization settings on demand and shows the
 * server's state diagnostics after every step; a badge appears when the
 * finished state reaches cos φ_m ≥ 0.85.
 */

import { degrees, escapeHtml } from "../format.js";
import type { CountRecordFields } from "../api.js";
import type { BenchState, DiagnosticsView } from "../state.js";

/** Badge threshold on the server-reported visibility. */
export const BADGE_COS_PHI_M = 0.85;

function latestAt(
  records: CountRecordFields[],
  alpha: number,
  beta: number,
): CountRecordFields | undefined {
  for (let i = records.length - 1; i >= 0; i--) {
    const record = records[i]!;
    if (record.alpha === alpha && record.beta === beta) return record;
  }
  return undefined;
}

function countCell(label: string, record: CountRecordFields | undefined): string {
  const value = record === undefined ? "—" : `${record.n_coinc}`;
  return `<div class="count-cell"><span>${label}</span><strong>${value}</strong></div>`;
}

function diagnosticsBlock(diag: DiagnosticsView | null): string {
  if (diag === null) {
    return `<p class="placeholder">no diagnostics yet</p>`;
  }
  const clampNote = diag.clamped
    ? `<p class="warning">visibility clamped to [-1, 1]; counts are marginal</p>`
    : "";
  return `<dl class="diagnostics">
    <dt>C offset</dt><dd id="diag-c">${diag.c_offset}</dd>
    <dt>A pairs</dt><dd id="diag-a">${diag.a_pairs}</dd>
    <dt>θ_l</dt><dd id="diag-theta-l">${degrees(diag.theta_l, 2)}</dd>
    <dt>φ_m</dt><dd id="diag-phi-m">${degrees(diag.phi_m, 2)}</dd>
    <dt>cos φ_m</dt><dd id="diag-cos-phi-m">${diag.cos_phi_m.toFixed(3)}</dd>
  </dl>${clampNote}`;
}

const INSTRUCTIONS: Record<string, string> = {
  idle:
    "Start the exercise: the bench detunes the pump dials and you align " +
    "them back by watching counts, just like at a real table.",
  equalize:
    "Step 1 — turn θ_l until N(0,0) and N(90,90) agree. Sample re-measures " +
    "the characterization settings at the current dials.",
  maximize: "Step 2 — turn φ_l to maximize N(45,45).",
  done: "Exercise finished; the diagnostics below describe the state you prepared.",
};

export function tuningPanel(state: BenchState): string {
  const phase = state.exercise.phase;
  const disabled = state.sessionId === null || state.busy ? " disabled" : "";
  const since = state.history.slice(state.exercise.startIndex);
  const n00 = latestAt(since, 0, 0);
  const n90 = latestAt(since, 90, 90);
  const floor = latestAt(since, 0, 90);
  const n45 = latestAt(since, 45, 45);
  const best45 = since
    .filter((r) => r.alpha === 45 && r.beta === 45)
    .reduce((best, r) => Math.max(best, r.n_coinc), 0);

  const parts: string[] = [
    `<p class="instruction">${escapeHtml(INSTRUCTIONS[phase]!)}</p>`,
  ];
  if (phase === "idle") {
    parts.push(`<button id="start-exercise"${disabled}>start exercise</button>`);
  } else {
    parts.push(`<div class="count-grid">
      ${countCell("N(0,0)", n00)}
      ${countCell("N(90,90)", n90)}
      ${countCell("N(0,90) floor", floor)}
      ${countCell("N(45,45)", n45)}
    </div>`);
    if (phase === "maximize") {
      parts.push(`<p class="readout">best N(45,45) so far: <strong>${best45}</strong></p>`);
    }
    if (phase === "equalize" || phase === "maximize") {
      const nextLabel = phase === "equalize" ? "next step" : "finish";
      parts.push(`<div class="controls">
      <button id="sample-step"${disabled}>sample</button>
      <button id="next-step"${disabled}>${nextLabel}</button>
      <button id="reset-exercise"${disabled}>reset</button>
    </div>`);
    } else {
      parts.push(`<div class="controls">
      <button id="reset-exercise"${disabled}>reset</button>
    </div>`);
    }
  }
  const tuned =
    phase === "done" &&
    state.diagnostics !== null &&
    state.diagnostics.cos_phi_m >= BADGE_COS_PHI_M;
  if (tuned) {
    parts.push(`<div class="badge" id="tuned-badge">state tuned — cos φ_m ≥ ${BADGE_COS_PHI_M}</div>`);
  }
  parts.push(diagnosticsBlock(state.diagnostics));
  return `<section class="panel" id="panel-tuning">
  <h2>Tuning exercise</h2>
  ${parts.join("\n  ")}
</section>`;
}
