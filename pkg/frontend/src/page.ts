/**
 * Whole-page template: session strip plus the four bench panels.
 *
 * The session strip is the only place the session id appears; the panels
 * below it render identically for any two sessions in the same state, which
 * is what makes scripted replays comparable table-for-table.
 */

import { escapeHtml } from "./format.js";
import { bellPanel } from "./panels/bell.js";
import { countsPanel } from "./panels/counts.js";
import { dialPanel } from "./panels/dials.js";
import { tuningPanel } from "./panels/tuning.js";
import type { BenchState } from "./state.js";

function sessionStrip(state: BenchState): string {
  const label =
    state.sessionId === null
      ? `<span class="session-label">no session</span>`
      : `<span class="session-label">session <code>${escapeHtml(state.sessionId)}</code></span>`;
  const busy = state.busy ? `<span class="busy-dot" title="request in flight">●</span>` : "";
  const openDisabled = state.busy ? " disabled" : "";
  const closeDisabled = state.sessionId === null || state.busy ? " disabled" : "";
  const error =
    state.error === null ? "" : `<div class="error" id="error-strip">${escapeHtml(state.error)}</div>`;
  return `<header class="session-strip">
  ${label} ${busy}
  <label>seed <input type="number" id="seed-input" step="1" value="0"${openDisabled}></label>
  <button id="open-session"${openDisabled}>open bench</button>
  <button id="close-session"${closeDisabled}>close</button>
  ${error}
</header>`;
}

export function renderPage(state: BenchState): string {
  return `${sessionStrip(state)}
<main class="bench">
${dialPanel(state)}
${countsPanel(state)}
${tuningPanel(state)}
${bellPanel(state)}
</main>`;
}
