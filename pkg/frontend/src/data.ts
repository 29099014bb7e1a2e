/**
 * Synthetic multi-class image sets for desk-scale runs.
 *
 * Each class gets a smooth deterministic pattern (class-dependent plane
 * waves per channel) plus seeded pixel noise, so stage activations carry
 * recoverable class structure without any external data.
 */

import * as tf from '@tensorflow/tfjs';
import { makeNormal, makeRng } from './rng.js';

export interface ImageSet {
  images: tf.Tensor4D;
  labels: Uint32Array;
  size: number;
  channels: number;
  classes: number;
}

export function syntheticImages(options: {
  n: number;
  classes?: number;
  size?: number;
  channels?: number;
  seed: number;
  noise?: number;
}): ImageSet {
  const { n, seed } = options;
  const classes = options.classes ?? 10;
  const size = options.size ?? 16;
  const channels = options.channels ?? 3;
  const noise = options.noise ?? 0.25;
  const rng = makeRng(seed);
  const normal = makeNormal(rng);

  const labels = new Uint32Array(n);
  for (let i = 0; i < n; i++) {
    labels[i] = i % classes;
  }
  const data = new Float32Array(n * size * size * channels);
  let off = 0;
  for (let i = 0; i < n; i++) {
    const c = labels[i];
    const fx = 1 + (c % 4);
    const fy = 1 + Math.floor(c / 4);
    const phase = (c * Math.PI) / classes;
    for (let y = 0; y < size; y++) {
      for (let x = 0; x < size; x++) {
        for (let ch = 0; ch < channels; ch++) {
          const wave = Math.sin((2 * Math.PI * fx * x) / size + phase + ch)
            * Math.cos((2 * Math.PI * fy * y) / size + phase);
          data[off++] = wave + noise * normal();
        }
      }
    }
  }
  const images = tf.tensor4d(data, [n, size, size, channels]);
  return { images, labels, size, channels, classes };
}
