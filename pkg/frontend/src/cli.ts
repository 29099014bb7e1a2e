/**
 * Extraction adapter CLI.
 *
 *   node dist/cli.js --model tiny --model-seed 3 --data synthetic \
 *        --n 300 --data-seed 1 --taps stage1,stage2,stage3,stage4 \
 *        --precision 4 --out outdir \
 *        [--trials 50 --inclusion-rate 0.5 --trials-out outdir/toy.trls]
 *
 * Writes one representation file per tap (and optionally a trial-records
 * file) in the binary formats consumed by the repdensity toolkit.
 */

import { parseArgs } from 'node:util';

import { syntheticImages } from './data.js';
import { extract } from './extract.js';
import { buildTinyResnet } from './model.js';
import { writeToyTrials } from './trials.js';

async function main(): Promise<number> {
  const { values } = parseArgs({
    options: {
      model: { type: 'string', default: 'tiny' },
      'model-seed': { type: 'string', default: '3' },
      data: { type: 'string', default: 'synthetic' },
      n: { type: 'string', default: '300' },
      classes: { type: 'string', default: '10' },
      'data-seed': { type: 'string', default: '1' },
      taps: { type: 'string', default: 'stage1,stage2,stage3,stage4' },
      precision: { type: 'string', default: '4' },
      out: { type: 'string' },
      trials: { type: 'string' },
      'inclusion-rate': { type: 'string', default: '0.5' },
      'trials-out': { type: 'string' },
    },
  });

  if (!values.out) {
    console.error('--out is required');
    return 2;
  }
  if (values.model !== 'tiny') {
    console.error(`unknown model ${values.model}; only 'tiny' is built in`);
    return 2;
  }
  if (values.data !== 'synthetic') {
    console.error(`unknown data source ${values.data}`);
    return 2;
  }
  const precision = Number(values.precision);
  if (precision !== 4 && precision !== 8) {
    console.error('--precision must be 4 or 8');
    return 2;
  }

  const dataset = syntheticImages({
    n: Number(values.n),
    classes: Number(values.classes),
    seed: Number(values['data-seed']),
  });
  const model = buildTinyResnet({ seed: Number(values['model-seed']) });
  const spec = {
    model: 'tiny_resnet',
    taps: values.taps!.split(',').map((t) => t.trim()).filter(Boolean),
    precision: precision as 4 | 8,
  };
  const result = await extract(model, dataset, spec, values.out);
  for (const [tap, path] of result.files) {
    console.log(`${tap}\t${result.dims.get(tap)}\t${path}`);
  }

  if (values.trials) {
    const out = values['trials-out'] ?? `${values.out}/toy.trls`;
    await writeToyTrials({
      dataset,
      trials: Number(values.trials),
      inclusionRate: Number(values['inclusion-rate']),
      seed: Number(values['data-seed']) + 1,
    }, out);
    console.log(`trials\t${values.trials}\t${out}`);
  }
  return 0;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(err);
    process.exit(1);
  },
);
