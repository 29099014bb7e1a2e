/**
 * Desk-scale trial records for memorization aggregation.
 *
 * Every trial samples an inclusion mask at the given rate, trains a small
 * dense classifier from scratch on the included examples, and records
 * correctness on all examples (included and excluded alike). The masks
 * come from a seeded stream; training itself is stochastic, which is what
 * the aggregation is meant to average over.
 */

import * as tf from '@tensorflow/tfjs';

import { ImageSet } from './data.js';
import { TrialData, writeTrialRecords } from './formats.js';
import { makeRng } from './rng.js';

export interface ToyTrialOptions {
  dataset: ImageSet;
  trials: number;
  inclusionRate: number;
  seed: number;
  epochs?: number;
  hiddenUnits?: number;
}

function trialClassifier(dataset: ImageSet, seed: number,
                         hiddenUnits: number): tf.LayersModel {
  const model = tf.sequential({
    layers: [
      tf.layers.flatten({
        inputShape: [dataset.size, dataset.size, dataset.channels],
      }),
      tf.layers.dense({
        units: hiddenUnits, activation: 'relu',
        kernelInitializer: tf.initializers.glorotUniform({ seed }),
      }),
      tf.layers.dense({
        units: dataset.classes, activation: 'softmax',
        kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 1 }),
      }),
    ],
  });
  model.compile({ optimizer: tf.train.adam(0.01),
                  loss: 'sparseCategoricalCrossentropy' });
  return model;
}

export async function runToyTrials(options: ToyTrialOptions):
    Promise<TrialData> {
  const { dataset, trials, inclusionRate, seed } = options;
  const epochs = options.epochs ?? 8;
  const hiddenUnits = options.hiddenUnits ?? 48;
  if (!(inclusionRate > 0 && inclusionRate < 1)) {
    throw new Error(
      `inclusion rate must lie strictly between 0 and 1, got ${inclusionRate}`);
  }
  if (trials < 1) {
    throw new Error(`need at least one trial, got ${trials}`);
  }
  const n = dataset.labels.length;
  const rng = makeRng(seed);
  const labelTensor = tf.tensor1d(Float32Array.from(dataset.labels), 'float32');

  const inclusion: boolean[][] = [];
  const correctness: boolean[][] = [];
  for (let t = 0; t < trials; t++) {
    let mask: boolean[];
    do {
      mask = Array.from({ length: n }, () => rng() < inclusionRate);
    } while (mask.every(Boolean) || !mask.some(Boolean));
    const keep = mask.flatMap((m, i) => (m ? [i] : []));

    const model = trialClassifier(dataset, seed * 1000 + t, hiddenUnits);
    const keepIdx = tf.tensor1d(Int32Array.from(keep), 'int32');
    const trainX = tf.gather(dataset.images, keepIdx);
    const trainY = tf.gather(labelTensor, keepIdx);
    await model.fit(trainX, trainY, {
      epochs, batchSize: 16, shuffle: true, verbose: 0,
    });
    const probs = model.predict(dataset.images) as tf.Tensor2D;
    const predicted = (await tf.argMax(probs, 1).data()) as Int32Array;

    inclusion.push(mask);
    correctness.push(Array.from(
      { length: n }, (_, i) => predicted[i] === dataset.labels[i]));

    tf.dispose([keepIdx, trainX, trainY, probs]);
    model.dispose();
  }
  labelTensor.dispose();
  return { inclusion, correctness };
}

export async function writeToyTrials(options: ToyTrialOptions,
                                     path: string): Promise<TrialData> {
  const records = await runToyTrials(options);
  writeTrialRecords(records, path);
  return records;
}
