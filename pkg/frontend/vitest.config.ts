import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    globalSetup: ["test/globalSetup.ts"],
    environment: "node",
    testTimeout: 120_000,
    hookTimeout: 120_000,
    // e2e tests share one live backend; keep them on a single worker
    pool: "forks",
    poolOptions: { forks: { singleFork: true } },
  },
});
