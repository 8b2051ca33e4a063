/**
 * Bench controller: the actions a user can take, expressed over the wire
 * client and the pure state reducer. main.ts binds these to DOM events; the
 * end-to-end tests drive the same methods directly, so a scripted session
 * and a clicked one follow exactly the same code path.
 *
 * Every action wraps its network calls in a busy guard. While one is in
 * flight the controls render disabled and further actions return without
 * doing anything — the client-side mirror of the server's one-acquisition-
 * at-a-time rule.
 */

import {
  BenchClient,
  WireError,
  type ChshRequest,
  type CountRecordFields,
  type Dials,
  type SessionConfig,
} from "./api.js";
import { COUNTS_HEADER, stagedToCsv } from "./csv.js";
import { initialState, reduce, type BenchEvent, type BenchState } from "./state.js";

/** Characterization settings sampled for the server's state diagnostics. */
export const DIAGNOSTIC_SETTINGS: ReadonlyArray<readonly [number, number]> = [
  [0, 0],
  [90, 90],
  [0, 90],
  [45, 45],
];

/** Where the exercise parks the pump dials before the user aligns them. */
export const EXERCISE_DETUNE = { theta_l: 18, phi_l: 132 } as const;

function errorText(err: unknown): string {
  if (err instanceof Error) return err.message;
  return String(err);
}

export class Bench {
  state: BenchState = initialState();

  constructor(
    readonly client: BenchClient,
    private readonly onChange: (state: BenchState) => void = () => {},
  ) {}

  private dispatch(event: BenchEvent): void {
    this.state = reduce(this.state, event);
    this.onChange(this.state);
  }

  /** Run one user action; no-op while another is in flight. */
  private async act(fn: () => Promise<void>): Promise<void> {
    if (this.state.busy) return;
    this.dispatch({ type: "request-started" });
    try {
      await fn();
      this.dispatch({ type: "request-finished" });
    } catch (err) {
      this.dispatch({ type: "request-failed", message: errorText(err) });
    }
  }

  private get sessionId(): string {
    const id = this.state.sessionId;
    if (id === null) throw new Error("no open session");
    return id;
  }

  // -- session ------------------------------------------------------------

  async openSession(config: SessionConfig = {}): Promise<void> {
    await this.act(async () => {
      const session = await this.client.createSession(config);
      this.dispatch({
        type: "session-opened",
        sessionId: session.session_id,
        settings: session.settings,
      });
    });
  }

  async closeSession(): Promise<void> {
    await this.act(async () => {
      if (this.state.sessionId !== null) {
        await this.client.deleteSession(this.state.sessionId);
      }
      this.dispatch({ type: "session-closed" });
    });
  }

  // -- dials and acquisition ----------------------------------------------

  async applyDials(dials: Partial<Dials>): Promise<void> {
    await this.act(() => this.applyDialsInner(dials));
  }

  private async applyDialsInner(dials: Partial<Dials>): Promise<void> {
    const echo = await this.client.updateSettings(this.sessionId, dials);
    this.dispatch({ type: "settings-echoed", settings: echo });
  }

  setDuration(durationS: number): void {
    if (Number.isFinite(durationS) && durationS > 0) {
      this.dispatch({ type: "duration-changed", durationS });
    }
  }

  toggleContinuous(on: boolean): void {
    this.dispatch({ type: "continuous-toggled", on });
  }

  async acquireOnce(): Promise<void> {
    await this.act(async () => {
      await this.acquireInner();
    });
  }

  private async acquireInner(): Promise<CountRecordFields> {
    const record = await this.client.acquire(this.sessionId, this.state.durationS);
    this.dispatch({ type: "record-acquired", record });
    return record;
  }

  async refreshDiagnostics(): Promise<void> {
    await this.act(() => this.refreshDiagnosticsInner());
  }

  private async refreshDiagnosticsInner(): Promise<void> {
    const diagnostics = await this.client.diagnostics(this.sessionId);
    this.dispatch({ type: "diagnostics-updated", diagnostics });
  }

  // -- tuning exercise -----------------------------------------------------

  /** Acquire the four characterization settings at the current dials. */
  private async sampleDiagnosticBatch(): Promise<void> {
    for (const [alpha, beta] of DIAGNOSTIC_SETTINGS) {
      await this.applyDialsInner({ alpha, beta });
      await this.acquireInner();
    }
  }

  async startExercise(): Promise<void> {
    await this.act(async () => {
      const saved = { ...this.state.dials };
      await this.applyDialsInner(EXERCISE_DETUNE);
      this.dispatch({ type: "exercise-started", savedDials: saved });
      await this.sampleDiagnosticBatch();
      await this.refreshDiagnosticsInner();
    });
  }

  /** Re-measure the counts the current step is watching. */
  async sampleExercise(): Promise<void> {
    const phase = this.state.exercise.phase;
    if (phase !== "equalize" && phase !== "maximize") return;
    await this.act(async () => {
      const settings: ReadonlyArray<readonly [number, number]> =
        phase === "equalize"
          ? [
              [0, 0],
              [90, 90],
              [0, 90],
            ]
          : [[45, 45]];
      for (const [alpha, beta] of settings) {
        await this.applyDialsInner({ alpha, beta });
        await this.acquireInner();
      }
    });
  }

  /** Finish the current step: fresh characterization batch, diagnostics, on. */
  async advanceExercise(): Promise<void> {
    const phase = this.state.exercise.phase;
    if (phase !== "equalize" && phase !== "maximize") return;
    await this.act(async () => {
      await this.sampleDiagnosticBatch();
      await this.refreshDiagnosticsInner();
      this.dispatch({ type: "exercise-advanced" });
    });
  }

  async resetExercise(): Promise<void> {
    const saved = this.state.exercise.savedDials;
    await this.act(async () => {
      if (saved !== null) {
        await this.applyDialsInner(saved);
      }
      this.dispatch({ type: "exercise-reset" });
    });
  }

  // -- Bell wizard ---------------------------------------------------------

  async runBellAuto(request: ChshRequest = {}): Promise<void> {
    await this.act(async () => {
      const reply = await this.client.runChsh(this.sessionId, request);
      const records = await this.client.records(this.sessionId);
      this.dispatch({ type: "records-replaced", records: records.records });
      this.dispatch({
        type: "bell-finished",
        payload: reply.payload,
        raw: reply.raw,
        tabulated: records.records.slice(-16),
      });
    });
  }

  /** Manual mode: take one acquisition at the current dials and stage it. */
  async recordBellSetting(): Promise<void> {
    await this.act(async () => {
      const record = await this.acquireInner();
      this.dispatch({ type: "bell-staged", record });
    });
  }

  /** Send the staged records off for analysis (as CSV text, verbatim). */
  async analyzeStagedBell(): Promise<void> {
    const staged = this.state.bell.staged;
    if (staged.length === 0) return;
    const distinct = new Set(staged.map((r) => `${r.alpha}|${r.beta}`));
    if (distinct.size < staged.length) {
      this.dispatch({
        type: "bell-warning",
        message:
          "degenerate angles: the polarizers were not moved between " +
          "recordings; the CHSH table needs 16 distinct settings",
      });
      return;
    }
    await this.act(async () => {
      try {
        const reply = await this.client.analyzeChsh({ counts_csv: stagedToCsv(staged) });
        this.dispatch({
          type: "bell-finished",
          payload: reply.payload,
          raw: reply.raw,
          tabulated: staged,
        });
      } catch (err) {
        if (err instanceof WireError) {
          this.dispatch({ type: "bell-warning", message: err.message });
          return;
        }
        throw err;
      }
    });
  }

  /** Analyze a loaded count table. The text is never parsed client-side. */
  async analyzeCsvText(text: string): Promise<void> {
    await this.act(async () => {
      try {
        const reply = await this.client.analyzeChsh({ counts_csv: text });
        this.dispatch({
          type: "bell-finished",
          payload: reply.payload,
          raw: reply.raw,
          tabulated: [],
        });
      } catch (err) {
        if (err instanceof WireError) {
          this.dispatch({ type: "bell-warning", message: err.message });
          return;
        }
        throw err;
      }
    });
  }

  clearBell(): void {
    this.dispatch({ type: "bell-cleared" });
  }
}

export { COUNTS_HEADER };
