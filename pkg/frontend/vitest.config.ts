import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    include: ['test/**/*.test.ts'],
    testTimeout: 180000,
    hookTimeout: 180000,
    // tfjs keeps a shared backend; run files one at a time
    fileParallelism: false,
  },
});
