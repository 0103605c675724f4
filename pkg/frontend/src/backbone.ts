import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';

/**
 * Backbones are stored on disk as a directory with two files:
 *   model.json   { modelTopology, weightSpecs }
 *   weights.bin  raw little-endian weight buffer
 *
 * This mirrors tf.io model artifacts so any tfjs layers model can be dropped
 * in. Nothing here ever trains: models are loaded for inference only.
 */

export async function saveModelDir(model: tf.LayersModel, dir: string): Promise<void> {
  fs.mkdirSync(dir, { recursive: true });
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      fs.writeFileSync(
        path.join(dir, 'model.json'),
        JSON.stringify({
          modelTopology: artifacts.modelTopology,
          weightSpecs: artifacts.weightSpecs,
        }),
      );
      const weightData = artifacts.weightData as ArrayBuffer;
      fs.writeFileSync(path.join(dir, 'weights.bin'), Buffer.from(weightData));
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' } };
    }),
  );
}

export async function loadModelDir(dir: string): Promise<tf.LayersModel> {
  const jsonPath = path.join(dir, 'model.json');
  const weightsPath = path.join(dir, 'weights.bin');
  if (!fs.existsSync(jsonPath) || !fs.existsSync(weightsPath)) {
    throw new Error(`backbone not found locally: ${dir} (need model.json + weights.bin)`);
  }
  const meta = JSON.parse(fs.readFileSync(jsonPath, 'utf-8'));
  const weights = fs.readFileSync(weightsPath);
  const weightData = weights.buffer.slice(
    weights.byteOffset,
    weights.byteOffset + weights.byteLength,
  );
  return tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: meta.modelTopology,
      weightSpecs: meta.weightSpecs,
      weightData,
    }),
  );
}

/**
 * Sub-model emitting the chosen tap point: "penultimate" picks the layer
 * before the final one; any other value must name a layer exactly.
 */
export function tapLayer(model: tf.LayersModel, layer: string): tf.LayersModel {
  let target: tf.layers.Layer;
  if (layer === 'penultimate') {
    if (model.layers.length < 2) {
      throw new Error('model has no penultimate layer');
    }
    target = model.layers[model.layers.length - 2];
  } else {
    target = model.getLayer(layer);
  }
  return tf.model({ inputs: model.inputs, outputs: target.output as tf.SymbolicTensor });
}
