/**
 * Turn stage taps into representation files: run the tap model over the
 * image set, pool every channel's map to its spatial mean, and write one
 * file per tap with the tap name as the stage tag and labels copied from
 * the dataset. Extraction is deterministic given weights and data order.
 */

import { mkdirSync } from 'node:fs';
import { join } from 'node:path';

import * as tf from '@tensorflow/tfjs';

import { ImageSet } from './data.js';
import { writeRepresentations } from './formats.js';
import { TapSpec, tapModel } from './model.js';
import { pooledRows } from './pooling.js';

export interface ExtractionResult {
  files: Map<string, string>;
  dims: Map<string, number>;
}

export async function extract(model: tf.LayersModel, dataset: ImageSet,
                              spec: TapSpec, outDir: string,
                              batchSize = 64): Promise<ExtractionResult> {
  mkdirSync(outDir, { recursive: true });
  const probe = tapModel(model, spec.taps);
  const outputs = probe.predict(dataset.images,
                                { batchSize }) as tf.Tensor | tf.Tensor[];
  const maps = Array.isArray(outputs) ? outputs : [outputs];

  const files = new Map<string, string>();
  const dims = new Map<string, number>();
  for (let i = 0; i < spec.taps.length; i++) {
    const tap = spec.taps[i];
    const { rows, n, d } = await pooledRows(maps[i] as tf.Tensor4D);
    maps[i].dispose();
    const path = join(outDir, `${tap}.repr`);
    writeRepresentations({
      rows: spec.precision === 8 ? Float64Array.from(rows) : rows,
      n, d,
      labels: dataset.labels,
      stage: tap,
      precision: spec.precision,
    }, path);
    files.set(tap, path);
    dims.set(tap, d);
  }
  return { files, dims };
}
