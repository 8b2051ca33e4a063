/**
 * End-to-end: the real bench server, driven through the same controller the
 * browser uses. Covers the wire-level acceptance checks —
 *
 *   - a scripted seed-7 session reproduces the CLI's Bell result byte for
 *     byte through the wizard endpoint;
 *   - loading the bundled reference table displays S = 2.307 ± 0.035;
 *   - the same seed plus the same click script renders identical tables;
 *   - the guided tuning exercise on seed 7 earns the cos φ_m ≥ 0.85 badge.
 *
 * The server is `python3 -m bellbench.cli serve` on a free port; CLI
 * reference outputs come from child processes of the same package.
 */

import { execFile } from "node:child_process";
import { spawn, type ChildProcess } from "node:child_process";
import { mkdtemp, readFile, rm } from "node:fs/promises";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { promisify } from "node:util";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { BenchClient } from "../src/api.js";
import { Bench } from "../src/bench.js";
import { bellPanel } from "../src/panels/bell.js";
import { countsPanel } from "../src/panels/counts.js";
import { tuningPanel } from "../src/panels/tuning.js";
import type { BenchState } from "../src/state.js";

const run = promisify(execFile);
const REPO_ROOT = fileURLToPath(new URL("../..", import.meta.url));
const TABLE1 = join(REPO_ROOT, "fixtures", "table1.csv");

let server: ChildProcess;
let serverLog = "";
let base: string;
let scratch: string;

function freePort(): Promise<number> {
  return new Promise((resolvePort, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port"));
        return;
      }
      probe.close(() => resolvePort(address.port));
    });
  });
}

async function waitReady(url: string, deadlineMs: number): Promise<void> {
  const until = Date.now() + deadlineMs;
  for (;;) {
    try {
      await fetch(`${url}/v1/sessions/warmup-probe`);
      return; // any HTTP answer (404 here) means the server is up
    } catch {
      if (Date.now() > until) {
        throw new Error(`bench server did not come up; log so far:\n${serverLog}`);
      }
      await new Promise((r) => setTimeout(r, 150));
    }
  }
}

beforeAll(async () => {
  scratch = await mkdtemp(join(tmpdir(), "bellbench-ui-"));
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  server = spawn("python3", ["-m", "bellbench.cli", "serve", "--port", `${port}`], {
    cwd: REPO_ROOT,
    stdio: ["ignore", "pipe", "pipe"],
  });
  server.stdout?.on("data", (chunk) => (serverLog += chunk));
  server.stderr?.on("data", (chunk) => (serverLog += chunk));
  await waitReady(base, 30_000);
});

afterAll(async () => {
  server?.kill();
  if (scratch) await rm(scratch, { recursive: true, force: true });
});

function newBench(): Bench {
  return new Bench(new BenchClient(base));
}

/** Latest coincidence count at a setting, from the exercise's slice of history. */
function latestCount(state: BenchState, alpha: number, beta: number): number {
  const since = state.history.slice(state.exercise.startIndex);
  for (let i = since.length - 1; i >= 0; i--) {
    const record = since[i]!;
    if (record.alpha === alpha && record.beta === beta) return record.n_coinc;
  }
  throw new Error(`no record at (${alpha}, ${beta})`);
}

describe("bell wizard over the wire", () => {
  it("a scripted seed-7 session reproduces the CLI result byte for byte", async () => {
    const reference = join(scratch, "seed7.json");
    await run("python3", ["-m", "bellbench.cli", "bell", "--seed", "7", "--out", reference], {
      cwd: REPO_ROOT,
    });
    const bench = newBench();
    await bench.openSession({ apparatus: { rng_seed: 7 } });
    await bench.runBellAuto();
    expect(bench.state.error).toBeNull();
    expect(bench.state.bell.resultRaw).toBe(await readFile(reference, "utf8"));
    // The wizard's sixteen settings land in the strip-chart history too.
    expect(bench.state.history).toHaveLength(16);
  });

  it("loading the reference table displays S = 2.307 ± 0.035", async () => {
    const reference = join(scratch, "table1-result.json");
    await run(
      "python3",
      ["-m", "bellbench.cli", "bell", "--counts", TABLE1, "--out", reference],
      { cwd: REPO_ROOT },
    );
    const bench = newBench();
    await bench.openSession();
    const csvText = await readFile(TABLE1, "utf8");
    await bench.analyzeCsvText(csvText);
    expect(bench.state.bell.warning).toBeNull();
    const html = bellPanel(bench.state);
    expect(html).toContain("S = 2.307 ± 0.035");
    expect(html).toContain("violates the CHSH bound");
    // Same analysis, same bytes, whether the CSV arrives by CLI or by wire.
    expect(bench.state.bell.resultRaw).toBe(await readFile(reference, "utf8"));
  });

  it("auto-run on a near-ideal bench lands within 3σ of 2√2", async () => {
    const bench = newBench();
    await bench.openSession({
      apparatus: {
        pair_rate: 2e5,
        singles_rate_a: 0,
        singles_rate_b: 0,
        coincidence_window_tau: 0,
        background_coinc_rate: 0,
        rng_seed: 11,
      },
    });
    await bench.runBellAuto();
    const result = bench.state.bell.result!;
    expect(Math.abs(result.s_value - 2 * Math.SQRT2)).toBeLessThanOrEqual(3 * result.sigma_s);
    expect(bellPanel(bench.state)).toContain("violates the CHSH bound");
  });

  it("a manual run with the polarizers never moved warns about degenerate angles", async () => {
    const bench = newBench();
    await bench.openSession({ apparatus: { rng_seed: 5 } });
    for (let i = 0; i < 3; i++) {
      await bench.recordBellSetting();
    }
    await bench.analyzeStagedBell();
    expect(bench.state.bell.warning).toContain("degenerate angles");
    expect(bench.state.bell.result).toBeNull();
    expect(bellPanel(bench.state)).toContain(`id="bell-warning"`);
  });

  it("surfaces the server's analysis complaints inline", async () => {
    const bench = newBench();
    await bench.openSession();
    // Sixteen rows, but all at one setting: the analysis endpoint rejects it.
    const rows = Array.from({ length: 16 }, () => "0,0,15,100,100,5");
    await bench.analyzeCsvText(`alpha_deg,beta_deg,duration_s,n_a,n_b,n_coinc\n${rows.join("\n")}\n`);
    expect(bench.state.bell.warning).not.toBeNull();
    expect(bellPanel(bench.state)).toContain(`id="bell-warning"`);
  });
});

describe("dial panel against the live bench", () => {
  it("aligned analyzers sit at pair scale; crossed ones drop to the floor", async () => {
    const bench = newBench();
    await bench.openSession({
      apparatus: {
        pair_rate: 556,
        singles_rate_a: 0,
        singles_rate_b: 0,
        coincidence_window_tau: 0,
        background_coinc_rate: 22,
        rng_seed: 11,
      },
    });
    bench.setDuration(2);
    await bench.applyDials({ alpha: 0, beta: 0 });
    await bench.acquireOnce();
    const aligned = bench.state.history.at(-1)!.n_coinc;
    await bench.applyDials({ beta: 90 });
    await bench.acquireOnce();
    const crossed = bench.state.history.at(-1)!.n_coinc;
    expect(aligned).toBeGreaterThan(crossed + 300);
    // the floor is background only: 22/s for 2 s, give or take Poisson
    expect(crossed).toBeLessThan(100);
    expect(countsPanel(bench.state)).toContain(`N = ${crossed} coincidences in 2 s`);
  });

  it("dials persist across acquisitions", async () => {
    const bench = newBench();
    await bench.openSession();
    await bench.applyDials({ alpha: 22.5, beta: -45 });
    await bench.acquireOnce();
    await bench.acquireOnce();
    expect(bench.state.dials.alpha).toBe(22.5);
    expect(bench.state.history.at(-1)!.alpha).toBe(22.5);
    expect(bench.state.history.at(-1)!.beta).toBe(-45);
  });
});

describe("deterministic replay", () => {
  async function clickScript(bench: Bench): Promise<string[]> {
    await bench.openSession({ apparatus: { rng_seed: 3 } });
    await bench.applyDials({ alpha: 45, beta: 45 });
    await bench.acquireOnce();
    await bench.applyDials({ alpha: 0, beta: 90 });
    await bench.acquireOnce();
    await bench.runBellAuto();
    return [countsPanel(bench.state), bellPanel(bench.state), tuningPanel(bench.state)];
  }

  it("same seed + same click script → identical displayed tables", async () => {
    const first = await clickScript(newBench());
    const second = await clickScript(newBench());
    expect(second).toEqual(first);
    expect(first[1]).toContain("bell-table");
  });

  it("different seeds diverge", async () => {
    const first = await clickScript(newBench());
    const bench = newBench();
    await bench.openSession({ apparatus: { rng_seed: 4 } });
    await bench.applyDials({ alpha: 45, beta: 45 });
    await bench.acquireOnce();
    expect(countsPanel(bench.state)).not.toBe(first[0]);
  });
});

describe("tuning exercise", () => {
  it("completing the exercise on seed 7 earns the cos φ_m ≥ 0.85 badge", async () => {
    const bench = newBench();
    await bench.openSession({ apparatus: { rng_seed: 7 } });
    const before = { ...bench.state.dials };
    bench.setDuration(30); // a patient student: ~1100 pairs per sample

    await bench.startExercise();
    expect(bench.state.exercise.phase).toBe("equalize");
    // Starting diagnostics describe the detuned state the exercise set up.
    expect(bench.state.diagnostics).not.toBeNull();
    expect(bench.state.diagnostics!.cos_phi_m).toBeLessThan(0.85);
    expect(tuningPanel(bench.state)).not.toContain("tuned-badge");

    // Step 1 — equalize N(0,0) and N(90,90) with the theta_l dial, the way a
    // student would: coarse scan, then a fine scan around the best reading.
    let bestTheta = 18;
    let bestGap = Infinity;
    for (let theta = 15; theta <= 75; theta += 5) {
      await bench.applyDials({ theta_l: theta });
      await bench.sampleExercise();
      const gap = Math.abs(latestCount(bench.state, 0, 0) - latestCount(bench.state, 90, 90));
      if (gap < bestGap) {
        bestGap = gap;
        bestTheta = theta;
      }
    }
    let fineTheta = bestTheta;
    bestGap = Infinity;
    for (let theta = bestTheta - 6; theta <= bestTheta + 6; theta += 1) {
      await bench.applyDials({ theta_l: theta });
      await bench.sampleExercise();
      const gap = Math.abs(latestCount(bench.state, 0, 0) - latestCount(bench.state, 90, 90));
      if (gap < bestGap) {
        bestGap = gap;
        fineTheta = theta;
      }
    }
    await bench.applyDials({ theta_l: fineTheta });
    await bench.advanceExercise();
    expect(bench.state.exercise.phase).toBe("maximize");
    expect(bench.state.diagnostics).not.toBeNull(); // shown after the step

    // Step 2 — maximize N(45,45) with the phi_l dial, same pattern.
    let bestPhi = 0;
    let bestCount = -1;
    for (let phi = 0; phi <= 180; phi += 15) {
      await bench.applyDials({ phi_l: phi });
      await bench.sampleExercise();
      const count = latestCount(bench.state, 45, 45);
      if (count > bestCount) {
        bestCount = count;
        bestPhi = phi;
      }
    }
    let finePhi = bestPhi;
    bestCount = -1;
    for (let phi = bestPhi - 14; phi <= bestPhi + 14; phi += 2) {
      await bench.applyDials({ phi_l: phi });
      await bench.sampleExercise();
      const count = latestCount(bench.state, 45, 45);
      if (count > bestCount) {
        bestCount = count;
        finePhi = phi;
      }
    }
    await bench.applyDials({ phi_l: finePhi });
    await bench.advanceExercise();

    expect(bench.state.exercise.phase).toBe("done");
    expect(bench.state.error).toBeNull();
    expect(bench.state.diagnostics!.cos_phi_m).toBeGreaterThanOrEqual(0.85);
    expect(tuningPanel(bench.state)).toContain(`id="tuned-badge"`);

    // Reset hands back the dials from before the exercise.
    await bench.resetExercise();
    expect(bench.state.dials).toEqual(before);
    expect(bench.state.exercise.phase).toBe("idle");
  });
});
