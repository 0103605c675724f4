import * as fs from 'fs';
import * as tf from '@tensorflow/tfjs';
import { loadImage } from './image';
import { ExportManifest, ManifestImage } from './manifest';
import { loadModelDir, tapLayer } from './backbone';
import { writeOodf } from './oodf';

export interface ExportResult {
  written: number;
  dim: number;
  skipped: ManifestImage[];
  output: string;
}

/**
 * Run every manifest image through the backbone's tap layer and append the
 * features to one OODF file, in manifest order. Undecodable images are
 * skipped with a warning (and recorded next to the output as
 * <output>.skipped.json); an empty result is a hard error.
 */
export async function exportFeatures(manifest: ExportManifest): Promise<ExportResult> {
  const model = await loadModelDir(manifest.backbone);
  const tap = tapLayer(model, manifest.layer);

  const rows: Float32Array[] = [];
  const labels: number[] = [];
  const skipped: ManifestImage[] = [];
  let dim = 0;
  for (const image of manifest.images) {
    let tensor: tf.Tensor3D;
    try {
      tensor = loadImage(image.path, manifest);
    } catch (err) {
      console.warn(`oodf-export: warning: skipping undecodable image ${image.path}: ${err}`);
      skipped.push(image);
      continue;
    }
    const features = tf.tidy(() => {
      const batched = tensor.expandDims(0);
      const out = tap.predict(batched) as tf.Tensor;
      return out.reshape([out.size]);
    });
    const data = (await features.data()) as Float32Array;
    tensor.dispose();
    features.dispose();
    if (dim === 0) {
      dim = data.length;
    } else if (data.length !== dim) {
      throw new Error(`feature width changed: ${data.length} vs ${dim}`);
    }
    rows.push(Float32Array.from(data));
    labels.push(image.label);
  }
  if (rows.length === 0) {
    throw new Error('no image produced features; nothing to write');
  }

  const flat = new Float32Array(rows.length * dim);
  rows.forEach((row, i) => flat.set(row, i * dim));
  writeOodf(manifest.output, flat, Int32Array.from(labels), dim);
  if (skipped.length > 0) {
    fs.writeFileSync(`${manifest.output}.skipped.json`, JSON.stringify({ skipped }, null, 2));
  }
  return { written: rows.length, dim, skipped, output: manifest.output };
}
