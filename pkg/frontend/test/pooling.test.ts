import * as tf from '@tensorflow/tfjs';
import { describe, expect, it } from 'vitest';

import { globalAveragePool, pooledRows } from '../src/pooling.js';
import { makeRng } from '../src/rng.js';

describe('global average pooling', () => {
  it('maps a constant channel to its value', async () => {
    const maps = tf.fill([2, 4, 4, 3], 0).add(
      tf.tensor1d([1.5, -2.0, 0.25])) as tf.Tensor4D;
    const pooled = globalAveragePool(maps);
    const values = await pooled.array();
    for (const row of values) {
      expect(row[0]).toBeCloseTo(1.5, 6);
      expect(row[1]).toBeCloseTo(-2.0, 6);
      expect(row[2]).toBeCloseTo(0.25, 6);
    }
  });

  it('averages the 2x2 map {1,2,3,4} to 2.5', async () => {
    const maps = tf.tensor4d([1, 2, 3, 4], [1, 2, 2, 1]);
    const { rows, n, d } = await pooledRows(maps);
    expect(n).toBe(1);
    expect(d).toBe(1);
    expect(rows[0]).toBeCloseTo(2.5, 7);
  });

  it('matches an explicit nested-loop oracle to 1e-5', async () => {
    const rng = makeRng(7);
    const [n, h, w, c] = [5, 6, 7, 4];
    const raw = Float32Array.from({ length: n * h * w * c },
                                  () => rng() * 4 - 2);
    const maps = tf.tensor4d(raw, [n, h, w, c]);
    const { rows } = await pooledRows(maps);

    for (let i = 0; i < n; i++) {
      for (let ch = 0; ch < c; ch++) {
        let total = 0;
        for (let y = 0; y < h; y++) {
          for (let x = 0; x < w; x++) {
            total += raw[((i * h + y) * w + x) * c + ch];
          }
        }
        const oracle = total / (h * w);
        expect(Math.abs(rows[i * c + ch] - oracle)).toBeLessThan(1e-5);
      }
    }
  });
});
