import { defineConfig } from "vitest/config";

// The end-to-end test drives a real `stam serve` child process, so it gets a
// long timeout and runs sequentially, separate from the unit suite.
export default defineConfig({
  test: {
    include: ["test/e2e.test.ts"],
    testTimeout: 180_000,
    hookTimeout: 120_000,
    fileParallelism: false,
  },
});
