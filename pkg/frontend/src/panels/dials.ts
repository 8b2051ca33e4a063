/**
 * Dial panel: pump preparation (theta_l, phi_l) and analyzer (alpha, beta)
 * rotary controls, in half-degree steps. Applying posts the values to the
 * session's settings endpoint; the displayed numbers are the server's echo.
 */

import { degrees, escapeHtml } from "../format.js";
import type { BenchState } from "../state.js";

interface DialSpec {
  id: string;
  key: "theta_l" | "phi_l" | "alpha" | "beta";
  label: string;
  hint: string;
}

const DIALS: DialSpec[] = [
  { id: "dial-theta-l", key: "theta_l", label: "θ_l pump polarizer", hint: "sets the V/H balance" },
  { id: "dial-phi-l", key: "phi_l", label: "φ_l quartz plate", hint: "sets the relative phase" },
  { id: "dial-alpha", key: "alpha", label: "α signal analyzer", hint: "measurement side A" },
  { id: "dial-beta", key: "beta", label: "β idler analyzer", hint: "measurement side B" },
];

export function dialPanel(state: BenchState): string {
  const disabled = state.sessionId === null || state.busy ? " disabled" : "";
  const rows = DIALS.map(
    (dial) => `
    <label class="dial" title="${escapeHtml(dial.hint)}">
      <span>${escapeHtml(dial.label)}</span>
      <input type="number" id="${dial.id}" step="0.5" value="${state.dials[dial.key]}"${disabled}>
      <span class="readback">${degrees(state.dials[dial.key])}</span>
    </label>`,
  );
  return `<section class="panel" id="panel-dials">
  <h2>Dials</h2>
  ${rows.join("\n")}
  <label class="dial">
    <span>counting interval (s)</span>
    <input type="number" id="duration" step="0.5" min="0.5" value="${state.durationS}"${disabled}>
    <span class="readback">${state.durationS} s</span>
  </label>
  <button id="apply-dials"${disabled}>apply dials</button>
</section>`;
}
