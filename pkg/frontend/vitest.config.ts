import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // the integration suite generates a tiny dataset and boots the render
    // service, which takes a few seconds on first run
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
