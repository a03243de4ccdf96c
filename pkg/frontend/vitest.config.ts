import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    globalSetup: process.env.VIEWER_SKIP_SERVICE ? [] : ["tests/service_setup.ts"],
    testTimeout: 30_000,
    hookTimeout: 120_000,
  },
});
