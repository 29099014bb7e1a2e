/**
 * Global average pooling: collapse each channel's activation map to its
 * spatial mean, turning an (n, h, w, c) batch into an (n, c) matrix of
 * per-kernel responses.
 */

import * as tf from '@tensorflow/tfjs';

export function globalAveragePool(maps: tf.Tensor4D): tf.Tensor2D {
  return tf.tidy(() => tf.mean(maps, [1, 2]) as tf.Tensor2D);
}

/** Pool and pull the values out as a flat row-major float array. */
export async function pooledRows(maps: tf.Tensor4D):
    Promise<{ rows: Float32Array; n: number; d: number }> {
  const pooled = globalAveragePool(maps);
  const rows = (await pooled.data()) as Float32Array;
  const [n, d] = pooled.shape;
  pooled.dispose();
  return { rows, n, d };
}
