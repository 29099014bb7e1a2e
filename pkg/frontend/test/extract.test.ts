import { mkdtempSync, readFileSync, rmSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import * as tf from '@tensorflow/tfjs';
import { afterAll, describe, expect, it } from 'vitest';

import { syntheticImages } from '../src/data.js';
import { readRepresentations } from '../src/formats.js';
import { extract } from '../src/extract.js';
import { buildTinyResnet, defaultTaps, tapModel } from '../src/model.js';

const dir = mkdtempSync(join(tmpdir(), 'adapter-extract-'));
afterAll(() => rmSync(dir, { recursive: true, force: true }));

describe('stage extraction', () => {
  it('pools every tap to the manual spatial means and keeps labels',
     async () => {
    const dataset = syntheticImages({ n: 24, seed: 4 });
    const model = buildTinyResnet({ seed: 9 });
    const spec = defaultTaps(4);
    const result = await extract(model, dataset, spec, join(dir, 'a'));

    expect([...result.files.keys()]).toEqual(spec.taps);
    const probe = tapModel(model, spec.taps);
    const raws = probe.predict(dataset.images) as tf.Tensor[];
    for (let t = 0; t < spec.taps.length; t++) {
      const file = readRepresentations(result.files.get(spec.taps[t])!);
      expect(file.stage).toBe(spec.taps[t]);
      expect(file.n).toBe(24);
      expect(Array.from(file.labels)).toEqual(Array.from(dataset.labels));

      const [n, h, w, c] = (raws[t] as tf.Tensor4D).shape;
      expect(file.d).toBe(c);
      const raw = await raws[t].data();
      for (let i = 0; i < n; i++) {
        for (let ch = 0; ch < c; ch++) {
          let total = 0;
          for (let y = 0; y < h; y++) {
            for (let x = 0; x < w; x++) {
              total += raw[((i * h + y) * w + x) * c + ch];
            }
          }
          const oracle = total / (h * w);
          expect(Math.abs(file.rows[i * c + ch] - oracle))
            .toBeLessThan(1e-5);
        }
      }
    }
  });

  it('is deterministic for fixed weights and data order', async () => {
    const dataset = syntheticImages({ n: 16, seed: 5 });
    const model = buildTinyResnet({ seed: 11 });
    const spec = { ...defaultTaps(4), taps: ['stage2', 'stage4'] };
    const first = await extract(model, dataset, spec, join(dir, 'b1'));
    const second = await extract(model, dataset, spec, join(dir, 'b2'));
    for (const tap of spec.taps) {
      const a = readFileSync(first.files.get(tap)!);
      const b = readFileSync(second.files.get(tap)!);
      expect(a.equals(b)).toBe(true);
    }
  });

  it('refuses taps that do not emit activation maps', () => {
    const model = buildTinyResnet({ seed: 2 });
    expect(() => tapModel(model, ['head'])).toThrow(/4-D/);
  });

  it('spatial sizes halve per stage', async () => {
    const model = buildTinyResnet({ seed: 1, inputSize: 16 });
    const probe = tapModel(model, defaultTaps().taps);
    const sizes = (probe.outputs as tf.SymbolicTensor[])
      .map((o) => o.shape[1]);
    expect(sizes).toEqual([8, 4, 2, 1]);
  });
});
