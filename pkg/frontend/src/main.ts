/**
 * Browser entry point: binds the bench controller to the DOM.
 *
 * The page is re-rendered from state after every event (template-string
 * HTML, no framework). The bench server address defaults to the CLI's
 * default serve address and can be overridden with ?api=http://host:port.
 */

import { BenchClient } from "./api.js";
import { Bench } from "./bench.js";
import { renderPage } from "./page.js";

const DEFAULT_API = "http://127.0.0.1:8765";
const REFRESH_MS = 800;

function must<T extends HTMLElement>(element: T | null, what: string): T {
  if (element === null) throw new Error(`missing element: ${what}`);
  return element;
}

function input(id: string): HTMLInputElement {
  return must(document.getElementById(id), id) as HTMLInputElement;
}

function apiBase(): string {
  const param = new URLSearchParams(window.location.search).get("api");
  return param ?? DEFAULT_API;
}

function main(): void {
  const app = must(document.getElementById("app"), "app");
  const bench = new Bench(new BenchClient(apiBase()), (state) => {
    // Keep the caret alive across innerHTML swaps: remember the focused
    // input's value, re-render, then put both back.
    const active = document.activeElement;
    const focusId = active instanceof HTMLInputElement ? active.id : null;
    const focusValue = focusId !== null ? (active as HTMLInputElement).value : "";
    app.innerHTML = renderPage(state);
    if (focusId !== null) {
      const again = document.getElementById(focusId);
      if (again instanceof HTMLInputElement) {
        again.value = focusValue;
        again.focus();
      }
    }
  });
  app.innerHTML = renderPage(bench.state);

  let loopArmed = false;
  function armLoop(): void {
    if (loopArmed) return;
    loopArmed = true;
    window.setTimeout(async () => {
      loopArmed = false;
      if (bench.state.continuous && bench.state.sessionId !== null) {
        await bench.acquireOnce();
        armLoop();
      }
    }, REFRESH_MS);
  }

  function readDials(): { theta_l: number; phi_l: number; alpha: number; beta: number } {
    return {
      theta_l: Number(input("dial-theta-l").value),
      phi_l: Number(input("dial-phi-l").value),
      alpha: Number(input("dial-alpha").value),
      beta: Number(input("dial-beta").value),
    };
  }

  app.addEventListener("click", (event) => {
    const target = event.target;
    if (!(target instanceof HTMLElement)) return;
    const actions: Record<string, () => void> = {
      "open-session": () => {
        const seed = Math.trunc(Number(input("seed-input").value) || 0);
        void bench.openSession({ apparatus: { rng_seed: seed } });
      },
      "close-session": () => void bench.closeSession(),
      "apply-dials": () => {
        bench.setDuration(Number(input("duration").value));
        void bench.applyDials(readDials());
      },
      "acquire-once": () => void bench.acquireOnce(),
      "start-exercise": () => void bench.startExercise(),
      "sample-step": () => void bench.sampleExercise(),
      "next-step": () => void bench.advanceExercise(),
      "reset-exercise": () => void bench.resetExercise(),
      "bell-auto": () => void bench.runBellAuto(),
      "bell-record": () => void bench.recordBellSetting(),
      "bell-analyze": () => void bench.analyzeStagedBell(),
      "bell-clear": () => bench.clearBell(),
    };
    const action = actions[target.id];
    if (action) action();
  });

  app.addEventListener("change", (event) => {
    const target = event.target;
    if (!(target instanceof HTMLInputElement)) return;
    if (target.id === "run-continuously") {
      bench.toggleContinuous(target.checked);
      if (target.checked) armLoop();
    } else if (target.id === "duration") {
      bench.setDuration(Number(target.value));
    } else if (target.id === "csv-file") {
      const file = target.files?.[0];
      if (file) {
        void file.text().then((text) => bench.analyzeCsvText(text));
      }
    }
  });
}

main();
