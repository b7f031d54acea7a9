import { defineConfig } from "vitest/config";

export default defineConfig({
  // Served from the API server's /ui mount, so assets must be relative.
  base: "./",
  build: { outDir: "dist" },
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    testTimeout: 15000,
    hookTimeout: 30000,
    // The chat e2e boots a real server; keep files sequential so two tests
    // never race for the port.
    fileParallelism: false,
  },
});
