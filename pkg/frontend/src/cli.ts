#!/usr/bin/env node
/**
 * oodf-export: dump image embeddings from a locally stored vision backbone
 * into the OODF file format.
 *
 *   oodf-export export --backbone <model dir> --layer penultimate \
 *       --manifest m.json --out feats.oodf
 *
 * CLI flags override the matching manifest fields.
 */

import { loadManifest } from './manifest';
import { exportFeatures } from './export';

function parseArgs(argv: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    if (argv[i].startsWith('--')) {
      const key = argv[i].slice(2);
      const value = argv[i + 1];
      if (value === undefined || value.startsWith('--')) {
        throw new Error(`flag --${key} needs a value`);
      }
      out.set(key, value);
      i++;
    } else if (i > 0) {
      throw new Error(`unexpected argument: ${argv[i]}`);
    }
  }
  return out;
}

async function main(): Promise<number> {
  const argv = process.argv.slice(2);
  if (argv[0] !== 'export') {
    console.error('usage: oodf-export export --backbone <dir> [--layer penultimate] --manifest m.json --out feats.oodf');
    return 2;
  }
  const flags = parseArgs(argv.slice(1));
  const manifestPath = flags.get('manifest');
  if (!manifestPath) {
    console.error('oodf-export: error: --manifest is required');
    return 2;
  }
  const manifest = loadManifest(manifestPath);
  if (flags.has('backbone')) manifest.backbone = flags.get('backbone')!;
  if (flags.has('layer')) manifest.layer = flags.get('layer')!;
  if (flags.has('out')) manifest.output = flags.get('out')!;
  if (!manifest.backbone) {
    console.error('oodf-export: error: no backbone given (flag or manifest)');
    return 2;
  }
  if (!manifest.output) {
    console.error('oodf-export: error: no output path given (flag or manifest)');
    return 2;
  }
  const result = await exportFeatures(manifest);
  console.log(
    `export: wrote ${result.written} rows of dim ${result.dim} to ${result.output}` +
      (result.skipped.length ? ` (${result.skipped.length} skipped)` : ''),
  );
  return 0;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(`oodf-export: error: ${err.message ?? err}`);
    process.exit(2);
  },
);
