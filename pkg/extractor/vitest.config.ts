import { defineConfig } from 'vitest/config'

export default defineConfig({
  test: {
    include: ['test/**/*.test.ts'],
    testTimeout: 180_000,
    hookTimeout: 180_000,
    // tfjs keeps a registry per process; run files sequentially
    fileParallelism: false,
  },
})
