import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    environmentOptions: {
      // the console is served by the risk service itself (same origin);
      // point the DOM at the e2e server so fetch is same-origin there too
      happyDOM: { url: "http://127.0.0.1:8651" },
    },
    include: ["tests/**/*.test.ts"],
    testTimeout: 120_000,
    hookTimeout: 120_000,
    fileParallelism: false,
  },
});
