/**
 * End-to-end bridge: the adapter's files drive the repdensity toolkit
 * through its CLI only. Covers the bit-exact round trip through the
 * primary loader and the extract -> reduce -> analyze pipeline.
 */

import { execFileSync } from 'node:child_process';
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { afterAll, describe, expect, it } from 'vitest';

import { syntheticImages } from '../src/data.js';
import { extract } from '../src/extract.js';
import { buildTinyResnet, defaultTaps } from '../src/model.js';

const dir = mkdtempSync(join(tmpdir(), 'adapter-e2e-'));
afterAll(() => rmSync(dir, { recursive: true, force: true }));

function primary(args: string[]): string {
  return execFileSync('python3', ['-m', 'repdensity.cli', ...args],
                      { encoding: 'utf-8' });
}

const CONFIG = `
[run]
seed = 3

[sampler]
sweeps = 20
burn_in = 10
thin = 2
block_size = 4

[analysis]
min_class_size = 5
bins = 10
`;

describe('adapter to toolkit pipeline', () => {
  it('emitted files round-trip through the primary loader bit-exactly',
     async () => {
    const dataset = syntheticImages({ n: 30, seed: 8 });
    const model = buildTinyResnet({ seed: 12 });
    const spec = { ...defaultTaps(4), taps: ['stage3'] };
    const result = await extract(model, dataset, spec, join(dir, 'rt'));
    const original = result.files.get('stage3')!;
    const rewritten = join(dir, 'rt', 'rewritten.repr');
    execFileSync('python3', ['-c', [
      'import sys',
      'from repdensity import load_representations, write_representations',
      'data = load_representations(sys.argv[1])',
      'write_representations(data, sys.argv[2])',
    ].join('\n'), original, rewritten]);
    expect(readFileSync(original).equals(readFileSync(rewritten))).toBe(true);

    const report = JSON.parse(primary(['inspect', original]));
    expect(report.n).toBe(30);
    expect(report.stage).toBe('stage3');
    expect(report.finite).toBe(true);
  });

  it('tiny CNN -> adapter -> reduce -> analyze yields one row per class',
     async () => {
    const dataset = syntheticImages({ n: 200, classes: 10, seed: 9 });
    const model = buildTinyResnet({ seed: 13 });
    const spec = { ...defaultTaps(4), taps: ['stage4'] };
    const result = await extract(model, dataset, spec, join(dir, 'smoke'));

    const cfgPath = join(dir, 'run.cfg');
    writeFileSync(cfgPath, CONFIG);
    const reduced = join(dir, 'smoke', 'stage4-reduced.repr');
    primary(['reduce', '--input', result.files.get('stage4')!,
             '--out', reduced, '--dim', '6']);

    const outDir = join(dir, 'smoke', 'analysis');
    primary(['analyze', '--repr', reduced, '--config', cfgPath,
             '--out-dir', outDir]);

    const stats = readFileSync(join(outDir, 'class_stats.csv'), 'utf-8')
      .trim().split(/\r?\n/);
    expect(stats[0]).toBe('class,mean,std,group');
    expect(stats).toHaveLength(11);
    const classes = stats.slice(1).map((row) => Number(row.split(',')[0]));
    expect([...classes].sort((a, b) => a - b))
      .toEqual([0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);

    const manifest = JSON.parse(
      readFileSync(join(outDir, 'manifest.json'), 'utf-8'));
    expect(Object.keys(manifest.outputs)).toContain('class_stats.csv');
  });
});
