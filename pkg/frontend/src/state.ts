/**
 * Bench display state and its reducer.
 *
 * The state mirrors the server: dial values come back from settings echoes,
 * counts from acquisition records, diagnostics and CHSH results from their
 * endpoints. The reducer is a pure function so the panels (and the replay
 * tests) can be driven without a DOM or a network.
 */

import type { ChshResultPayload, CountRecordFields, Dials, DiagnosticsPayload } from "./api.js";

/** Rolling window of acquisitions kept for the strip chart. */
export const HISTORY_LIMIT = 64;

/** Diagnostics fields as displayed (digest dropped; it is not per-state). */
export interface DiagnosticsView {
  c_offset: number;
  a_pairs: number;
  theta_l: number;
  cos_phi_m: number;
  phi_m: number;
  clamped: boolean;
}

export interface ChshView {
  e_ab: number;
  e_abp: number;
  e_apb: number;
  e_apbp: number;
  s_value: number;
  sigma_s: number;
  significance: number;
  inputs_digest: string | null;
}

export type ExercisePhase = "idle" | "equalize" | "maximize" | "done";

export interface ExerciseState {
  phase: ExercisePhase;
  /** Dials saved when the exercise started; reset restores them. */
  savedDials: Dials | null;
  /** History length when the exercise started; readouts only look past it. */
  startIndex: number;
}

export interface BellState {
  /** Records collected by hand with "record this setting". */
  staged: CountRecordFields[];
  result: ChshView | null;
  /** Exact response text behind `result`, for byte-identity checks. */
  resultRaw: string | null;
  /** Count rows the result was computed from, for the Table I-style grid. */
  tabulated: CountRecordFields[];
  warning: string | null;
}

export interface BenchState {
  sessionId: string | null;
  dials: Dials;
  durationS: number;
  history: CountRecordFields[];
  continuous: boolean;
  busy: boolean;
  error: string | null;
  diagnostics: DiagnosticsView | null;
  exercise: ExerciseState;
  bell: BellState;
}

export type BenchEvent =
  | { type: "session-opened"; sessionId: string; settings: Dials }
  | { type: "session-closed" }
  | { type: "request-started" }
  | { type: "request-finished" }
  | { type: "request-failed"; message: string }
  | { type: "settings-echoed"; settings: Dials }
  | { type: "duration-changed"; durationS: number }
  | { type: "continuous-toggled"; on: boolean }
  | { type: "record-acquired"; record: CountRecordFields }
  | { type: "records-replaced"; records: CountRecordFields[] }
  | { type: "diagnostics-updated"; diagnostics: DiagnosticsPayload }
  | { type: "exercise-started"; savedDials: Dials }
  | { type: "exercise-advanced" }
  | { type: "exercise-reset" }
  | { type: "bell-staged"; record: CountRecordFields }
  | { type: "bell-finished"; payload: ChshResultPayload; raw: string; tabulated: CountRecordFields[] }
  | { type: "bell-warning"; message: string }
  | { type: "bell-cleared" };

export function initialState(): BenchState {
  return {
    sessionId: null,
    dials: { theta_l: 45, phi_l: 0, alpha: 0, beta: 0 },
    durationS: 15,
    history: [],
    continuous: false,
    busy: false,
    error: null,
    diagnostics: null,
    exercise: { phase: "idle", savedDials: null, startIndex: 0 },
    bell: { staged: [], result: null, resultRaw: null, tabulated: [], warning: null },
  };
}

function chshView(payload: ChshResultPayload): ChshView {
  return {
    e_ab: payload.e_ab,
    e_abp: payload.e_abp,
    e_apb: payload.e_apb,
    e_apbp: payload.e_apbp,
    s_value: payload.s_value,
    sigma_s: payload.sigma_s,
    significance: payload.significance,
    inputs_digest: payload.inputs_digest,
  };
}

/** Just the four dial fields — settings echoes carry a wire envelope too. */
function dialsOf(settings: Dials): Dials {
  return {
    theta_l: settings.theta_l,
    phi_l: settings.phi_l,
    alpha: settings.alpha,
    beta: settings.beta,
  };
}

function diagnosticsView(payload: DiagnosticsPayload): DiagnosticsView {
  return {
    c_offset: payload.c_offset,
    a_pairs: payload.a_pairs,
    theta_l: payload.theta_l,
    cos_phi_m: payload.cos_phi_m,
    phi_m: payload.phi_m,
    clamped: payload.clamped,
  };
}

const EXERCISE_NEXT: Record<ExercisePhase, ExercisePhase> = {
  idle: "idle",
  equalize: "maximize",
  maximize: "done",
  done: "done",
};

export function reduce(state: BenchState, event: BenchEvent): BenchState {
  switch (event.type) {
    case "session-opened":
      return {
        ...initialState(),
        sessionId: event.sessionId,
        dials: dialsOf(event.settings),
        durationS: state.durationS,
      };
    case "session-closed":
      return { ...initialState(), durationS: state.durationS };
    case "request-started":
      return { ...state, busy: true, error: null };
    case "request-finished":
      return { ...state, busy: false };
    case "request-failed":
      return { ...state, busy: false, continuous: false, error: event.message };
    case "settings-echoed":
      return { ...state, dials: dialsOf(event.settings) };
    case "duration-changed":
      return { ...state, durationS: event.durationS };
    case "continuous-toggled":
      return { ...state, continuous: event.on };
    case "record-acquired": {
      const history = [...state.history, event.record];
      const dropped = Math.max(0, history.length - HISTORY_LIMIT);
      return {
        ...state,
        history: history.slice(dropped),
        exercise: {
          ...state.exercise,
          startIndex: Math.max(0, state.exercise.startIndex - dropped),
        },
      };
    }
    case "records-replaced":
      return { ...state, history: event.records.slice(-HISTORY_LIMIT) };
    case "diagnostics-updated":
      return { ...state, diagnostics: diagnosticsView(event.diagnostics) };
    case "exercise-started":
      return {
        ...state,
        diagnostics: null,
        exercise: {
          phase: "equalize",
          savedDials: { ...event.savedDials },
          startIndex: state.history.length,
        },
      };
    case "exercise-advanced":
      return {
        ...state,
        exercise: { ...state.exercise, phase: EXERCISE_NEXT[state.exercise.phase] },
      };
    case "exercise-reset":
      return {
        ...state,
        exercise: { phase: "idle", savedDials: null, startIndex: state.history.length },
      };
    case "bell-staged":
      return {
        ...state,
        bell: { ...state.bell, staged: [...state.bell.staged, event.record], warning: null },
      };
    case "bell-finished":
      return {
        ...state,
        bell: {
          staged: [],
          result: chshView(event.payload),
          resultRaw: event.raw,
          tabulated: event.tabulated.slice(),
          warning: null,
        },
      };
    case "bell-warning":
      return { ...state, bell: { ...state.bell, warning: event.message } };
    case "bell-cleared":
      return {
        ...state,
        bell: { staged: [], result: null, resultRaw: null, tabulated: [], warning: null },
      };
  }
}
