/**
 * Display formatting for server numbers.
 *
 * These functions round for the screen; they never compute physics. The raw
 * payloads stay in state for anything that needs full precision.
 */

/** "2.307 ± 0.035" — the headline S ± sigma readout. */
export function plusMinus(value: number, sigma: number, digits = 3): string {
  return `${value.toFixed(digits)} ± ${sigma.toFixed(digits)}`;
}

/** Correlation values get an explicit sign: "+0.4966", "-0.5433". */
export function signed(value: number, digits = 4): string {
  const text = value.toFixed(digits);
  return value >= 0 ? `+${text}` : text;
}

/** Dial angles: one decimal, degree sign ("22.5°"). */
export function degrees(value: number, digits = 1): string {
  return `${value.toFixed(digits)}°`;
}

/** Trim trailing zeros for labels where 22.5 and -45 should read naturally. */
export function compactAngle(value: number): string {
  return `${Number(value.toFixed(4))}`;
}

/** Verdict line under the S readout. */
export function verdict(sValue: number, significance: number): string {
  if (Math.abs(sValue) > 2) {
    return `|S| > 2 — violates the CHSH bound by ${significance.toFixed(1)} standard deviations`;
  }
  return "|S| ≤ 2 — consistent with the CHSH bound";
}

/** Shorten "sha256:0123abcd..." to "sha256:0123abcd" for the footer line. */
export function shortDigest(digest: string | null): string {
  if (digest === null) return "—";
  const [scheme, hex] = digest.split(":", 2);
  if (hex === undefined) return digest;
  return `${scheme}:${hex.slice(0, 8)}`;
}

/** Escape text that ends up inside HTML (server error messages, mostly). */
export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
