// Plain object config (no vitest/config import) so the suite also runs with
// a globally installed vitest, not just the local dev dependency.
export default {
  test: {
    include: ["tests/**/*.spec.ts"],
    environment: "node",
    // The e2e file boots the Python bench server and runs a full tuning
    // session against it; give it room.
    testTimeout: 120_000,
    hookTimeout: 60_000,
  },
};
