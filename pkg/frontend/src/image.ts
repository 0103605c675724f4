import * as fs from 'fs';
import * as tf from '@tensorflow/tfjs';
import { PNG } from 'pngjs';

export interface ImageRecipe {
  resize: { width: number; height: number };
  normalize: { mean: number[]; std: number[] };
}

/**
 * Decode a PNG into a normalized float tensor [height, width, 3].
 * Values are scaled to [0, 1], resized bilinearly, then standardized per
 * channel with the manifest's mean/std recipe.
 */
export function loadImage(imagePath: string, recipe: ImageRecipe): tf.Tensor3D {
  const png = PNG.sync.read(fs.readFileSync(imagePath));
  const { width, height, data } = png; // RGBA bytes
  const rgb = new Float32Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    rgb[3 * i] = data[4 * i] / 255;
    rgb[3 * i + 1] = data[4 * i + 1] / 255;
    rgb[3 * i + 2] = data[4 * i + 2] / 255;
  }
  return tf.tidy(() => {
    let img = tf.tensor3d(rgb, [height, width, 3]);
    if (width !== recipe.resize.width || height !== recipe.resize.height) {
      img = tf.image.resizeBilinear(img, [recipe.resize.height, recipe.resize.width]);
    }
    const mean = tf.tensor1d(recipe.normalize.mean);
    const std = tf.tensor1d(recipe.normalize.std);
    return img.sub(mean).div(std);
  });
}
