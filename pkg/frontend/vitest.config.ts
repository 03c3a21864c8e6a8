import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    // the ui-contract test boots a real service process
    testTimeout: 30_000,
    hookTimeout: 30_000,
  },
});
