import * as fs from 'fs';
import * as path from 'path';

export interface ManifestImage {
  path: string;
  label: number;
}

export interface ExportManifest {
  /** Backbone name: a directory holding model.json + weights.bin. */
  backbone: string;
  /** Layer tap point: "penultimate" or an explicit layer name. */
  layer: string;
  images: ManifestImage[];
  output: string;
  resize: { width: number; height: number };
  normalize: { mean: number[]; std: number[] };
}

const DEFAULT_NORMALIZE = { mean: [0.5, 0.5, 0.5], std: [0.5, 0.5, 0.5] };

export function loadManifest(manifestPath: string): ExportManifest {
  const raw = JSON.parse(fs.readFileSync(manifestPath, 'utf-8'));
  const dir = path.dirname(path.resolve(manifestPath));
  if (!Array.isArray(raw.images) || raw.images.length === 0) {
    throw new Error(`${manifestPath}: manifest needs a non-empty images list`);
  }
  const images: ManifestImage[] = raw.images.map((entry: any, i: number) => {
    if (typeof entry.path !== 'string') {
      throw new Error(`${manifestPath}: images[${i}] has no path`);
    }
    if (!Number.isInteger(entry.label)) {
      throw new Error(`${manifestPath}: images[${i}] label must be an integer`);
    }
    const resolved = path.isAbsolute(entry.path) ? entry.path : path.join(dir, entry.path);
    if (!fs.existsSync(resolved)) {
      throw new Error(`${manifestPath}: image does not exist: ${resolved}`);
    }
    return { path: resolved, label: entry.label };
  });
  if (!raw.resize || !(raw.resize.width > 0) || !(raw.resize.height > 0)) {
    throw new Error(`${manifestPath}: manifest needs a resize recipe {width, height}`);
  }
  const normalize = raw.normalize ?? DEFAULT_NORMALIZE;
  if (normalize.mean.length !== 3 || normalize.std.length !== 3) {
    throw new Error(`${manifestPath}: normalize.mean/std must have 3 channels`);
  }
  return {
    backbone: raw.backbone ?? '',
    layer: raw.layer ?? 'penultimate',
    images,
    output: raw.output ?? '',
    resize: { width: raw.resize.width, height: raw.resize.height },
    normalize,
  };
}
