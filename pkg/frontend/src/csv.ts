/**
 * Count-table CSV assembly for hand-recorded settings.
 *
 * The rows are the server's own record fields written back out; nothing is
 * computed here. Loaded files skip this module entirely — their text goes
 * to the analysis endpoint untouched.
 */

import type { CountRecordFields } from "./api.js";

export const COUNTS_HEADER = "alpha_deg,beta_deg,duration_s,n_a,n_b,n_coinc";

export function stagedToCsv(records: CountRecordFields[]): string {
  const lines = records.map(
    (r) => `${r.alpha},${r.beta},${r.duration_s},${r.n_a},${r.n_b},${r.n_coinc}`,
  );
  return [COUNTS_HEADER, ...lines, ""].join("\n");
}
