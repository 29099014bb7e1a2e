/**
 * Tiny residual CNN with four stages of decreasing spatial size.
 *
 * Each stage downsamples with a strided convolution and closes with a
 * residual summation; taps are taken from the output of that summation
 * (layers named stage1..stage4), which is also what the extraction CLI
 * lists as tap points. All initializers are seeded, so a given seed fully
 * determines the network.
 */

import * as tf from '@tensorflow/tfjs';

export interface TapSpec {
  model: string;
  taps: string[];
  precision: 4 | 8;
}

export interface TinyResnetOptions {
  seed: number;
  inputSize?: number;
  inputChannels?: number;
  stageChannels?: number[];
  numClasses?: number;
}

export function buildTinyResnet(options: TinyResnetOptions): tf.LayersModel {
  const seed = options.seed;
  const size = options.inputSize ?? 16;
  const inChannels = options.inputChannels ?? 3;
  const stageChannels = options.stageChannels ?? [8, 12, 16, 24];
  const numClasses = options.numClasses ?? 10;

  let nextSeed = seed;
  const init = () => tf.initializers.glorotUniform({ seed: nextSeed++ });

  const input = tf.input({ shape: [size, size, inChannels], name: 'image' });
  let x = tf.layers.conv2d({
    filters: stageChannels[0], kernelSize: 3, padding: 'same',
    activation: 'relu', kernelInitializer: init(), name: 'stem',
  }).apply(input) as tf.SymbolicTensor;

  stageChannels.forEach((filters, i) => {
    const down = tf.layers.conv2d({
      filters, kernelSize: 3, strides: 2, padding: 'same',
      activation: 'relu', kernelInitializer: init(),
      name: `stage${i + 1}_down`,
    }).apply(x) as tf.SymbolicTensor;
    const inner = tf.layers.conv2d({
      filters, kernelSize: 3, padding: 'same', activation: 'relu',
      kernelInitializer: init(), name: `stage${i + 1}_conv`,
    }).apply(down) as tf.SymbolicTensor;
    // end-of-stage summation; extraction taps read exactly this output
    x = tf.layers.add({ name: `stage${i + 1}` })
      .apply([down, inner]) as tf.SymbolicTensor;
  });

  const pooled = tf.layers.globalAveragePooling2d({ name: 'head_pool' })
    .apply(x) as tf.SymbolicTensor;
  const logits = tf.layers.dense({
    units: numClasses, activation: 'softmax',
    kernelInitializer: init(), name: 'head',
  }).apply(pooled) as tf.SymbolicTensor;

  return tf.model({ inputs: input, outputs: logits, name: 'tiny_resnet' });
}

export function defaultTaps(precision: 4 | 8 = 4): TapSpec {
  return {
    model: 'tiny_resnet',
    taps: ['stage1', 'stage2', 'stage3', 'stage4'],
    precision,
  };
}

/** Model emitting the raw activation map at every requested tap. */
export function tapModel(model: tf.LayersModel,
                         taps: string[]): tf.LayersModel {
  const outputs = taps.map((name) => {
    const layer = model.getLayer(name);
    const out = layer.output;
    if (Array.isArray(out)) {
      throw new Error(`tap ${name} has multiple outputs`);
    }
    if (out.shape.length !== 4) {
      throw new Error(
        `tap ${name} does not emit a 4-D activation map: ${out.shape}`);
    }
    return out;
  });
  return tf.model({ inputs: model.inputs, outputs });
}
