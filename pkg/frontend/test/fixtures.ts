import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';
import { PNG } from 'pngjs';
import { saveModelDir } from '../src/backbone';

/** Deterministic LCG so fixture weights and pixels never change. */
export function lcg(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}

export const INPUT_SIZE = 16;
export const FEATURE_DIM = 8;

/** Tiny conv backbone; the dense-8 layer is the penultimate tap point. */
export async function buildFixtureBackbone(dir: string): Promise<void> {
  const rand = lcg(1234);
  const model = tf.sequential();
  model.add(
    tf.layers.conv2d({
      inputShape: [INPUT_SIZE, INPUT_SIZE, 3],
      filters: 4,
      kernelSize: 3,
      activation: 'relu',
    }),
  );
  model.add(tf.layers.averagePooling2d({ poolSize: 2 }));
  model.add(tf.layers.flatten());
  model.add(tf.layers.dense({ units: FEATURE_DIM, activation: 'relu' }));
  model.add(tf.layers.dense({ units: 3 }));
  // overwrite the default random init with seeded weights
  const seeded = model.getWeights().map((w) => {
    const values = new Float32Array(w.size);
    for (let i = 0; i < values.length; i++) {
      values[i] = (rand() - 0.5) * 0.6;
    }
    return tf.tensor(values, w.shape);
  });
  model.setWeights(seeded);
  await saveModelDir(model, dir);
}

/** Solid-ish color PNG with deterministic per-pixel noise. */
export function writeFixturePng(
  filePath: string,
  base: [number, number, number],
  seed: number,
  size = INPUT_SIZE,
): void {
  const rand = lcg(seed);
  const png = new PNG({ width: size, height: size });
  for (let i = 0; i < size * size; i++) {
    png.data[4 * i] = Math.min(255, base[0] + Math.floor(rand() * 40));
    png.data[4 * i + 1] = Math.min(255, base[1] + Math.floor(rand() * 40));
    png.data[4 * i + 2] = Math.min(255, base[2] + Math.floor(rand() * 40));
    png.data[4 * i + 3] = 255;
  }
  fs.mkdirSync(path.dirname(filePath), { recursive: true });
  fs.writeFileSync(filePath, PNG.sync.write(png));
}

export interface FixtureSetup {
  dir: string;
  backboneDir: string;
  manifestPath: string;
  outputPath: string;
  labels: number[];
}

/** Three-image manifest (labels 0, 0, 1) plus the fixture backbone. */
export async function buildFixtureManifest(
  dir: string,
  labels: number[] = [0, 0, 1],
  name = 'manifest.json',
  output = 'feats.oodf',
): Promise<FixtureSetup> {
  const backboneDir = path.join(dir, 'backbone');
  if (!fs.existsSync(path.join(backboneDir, 'model.json'))) {
    await buildFixtureBackbone(backboneDir);
  }
  const bases: [number, number, number][] = [
    [200, 40, 40],
    [180, 60, 40],
    [40, 40, 200],
    [40, 200, 40],
    [200, 200, 40],
  ];
  const images = labels.map((label, i) => {
    const imgPath = path.join(dir, `img_${name}_${i}.png`);
    writeFixturePng(imgPath, bases[i % bases.length], 100 + 17 * i + label);
    return { path: imgPath, label };
  });
  const manifestPath = path.join(dir, name);
  const outputPath = path.join(dir, output);
  fs.writeFileSync(
    manifestPath,
    JSON.stringify(
      {
        backbone: backboneDir,
        layer: 'penultimate',
        images: images.map((img) => ({ path: img.path, label: img.label })),
        output: outputPath,
        resize: { width: INPUT_SIZE, height: INPUT_SIZE },
        normalize: { mean: [0.5, 0.5, 0.5], std: [0.5, 0.5, 0.5] },
      },
      null,
      2,
    ),
  );
  return { dir, backboneDir, manifestPath, outputPath, labels };
}
