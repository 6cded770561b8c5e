/**
 * Desk-scale training with the low-epoch recipe.
 *
 * Plain SGD with a cosine learning-rate schedule starting at 0.05, weight
 * decay 1e-4 applied through the gradients, batch size 128, 10 epochs by
 * default. A NaN loss marks the run as failed instead of emitting a
 * fabricated error value.
 */

import * as tf from "@tensorflow/tfjs";

import { augmentBatch, Dataset, DATASET_NAME, makeDataset } from "./data.js";
import { Network } from "./model.js";
import { Rng } from "./random.js";
import type { NetworkSpec } from "./spec.js";

export interface TrainerConfig {
  epochs: number;
  learningRate: number;
  weightDecay: number;
  batchSize: number;
  trainSize: number;
  evalSize: number;
  seed: number;
  augment: boolean;
}

export const DEFAULT_CONFIG: TrainerConfig = {
  epochs: 10,
  learningRate: 0.05,
  weightDecay: 1e-4,
  batchSize: 128,
  trainSize: 2048,
  evalSize: 512,
  seed: 0,
  augment: true,
};

export interface TrainResult {
  modelId: string;
  top1Error: number | null; // null when training diverged
  failed: boolean;
  epochs: number;
  dataset: string;
  finalLoss: number | null;
  coreParams: number;
  bnParams: number;
}

export function cosineLearningRate(base: number, epoch: number, totalEpochs: number): number {
  return base * 0.5 * (1 + Math.cos((Math.PI * epoch) / totalEpochs));
}

function sgdStep(
  net: Network,
  images: tf.Tensor4D,
  labels: tf.Tensor1D,
  numClasses: number,
  learningRate: number,
  weightDecay: number
): number {
  const variables = net.trainableVariables();
  const lossValue = tf.tidy(() => {
    const { value, grads } = tf.variableGrads(() => {
      const logits = net.forward(images, true);
      const oneHot = tf.oneHot(labels, numClasses);
      return tf.losses.softmaxCrossEntropy(oneHot, logits) as tf.Scalar;
    }, variables);
    const loss = value.dataSync()[0];
    if (Number.isFinite(loss)) {
      for (const variable of variables) {
        const grad = grads[variable.name];
        if (grad == null) continue;
        const update = tf.add(grad, tf.mul(variable, weightDecay));
        variable.assign(tf.sub(variable, tf.mul(update, learningRate)));
      }
    }
    return loss;
  });
  return lossValue;
}

export function evaluateTop1Error(net: Network, data: Dataset, batchSize: number): number {
  let wrong = 0;
  const total = data.labels.shape[0];
  for (let start = 0; start < total; start += batchSize) {
    const count = Math.min(batchSize, total - start);
    wrong += tf.tidy(() => {
      const images = tf.slice(data.images, [start, 0, 0, 0], [count, -1, -1, -1]) as tf.Tensor4D;
      const labels = tf.slice(data.labels, [start], [count]);
      const predictions = tf.argMax(net.forward(images, false), 1);
      const mismatches = tf.notEqual(predictions, labels.cast("int32"));
      return tf.sum(mismatches.cast("int32")).dataSync()[0];
    });
  }
  return wrong / total;
}

export function trainNetwork(
  spec: NetworkSpec,
  config: TrainerConfig = DEFAULT_CONFIG,
  log: (message: string) => void = () => {}
): TrainResult {
  const net = new Network(spec, config.seed);
  const resolution = spec.input.height;
  const train = makeDataset(resolution, config.trainSize, config.seed);
  const evalSet = makeDataset(resolution, config.evalSize, config.seed + 1);
  const order = new Rng(config.seed).derive(`order-${spec.modelId}`);
  const augmentRng = new Rng(config.seed).derive(`augment-${spec.modelId}`);

  let failed = false;
  let lastLoss: number | null = null;
  try {
    for (let epoch = 0; epoch < config.epochs && !failed; epoch++) {
      const learningRate = cosineLearningRate(config.learningRate, epoch, config.epochs);
      const indices = shuffled(config.trainSize, order);
      for (let start = 0; start < config.trainSize; start += config.batchSize) {
        const batchIdx = indices.slice(start, start + config.batchSize);
        const loss = tf.tidy(() => {
          const idx = tf.tensor1d(batchIdx, "int32");
          let images = tf.gather(train.images, idx) as tf.Tensor4D;
          if (config.augment) {
            images = augmentBatch(images, augmentRng);
          }
          const labels = tf.gather(train.labels, idx) as tf.Tensor1D;
          return sgdStep(net, images, labels, spec.numClasses, learningRate, config.weightDecay);
        });
        lastLoss = loss;
        if (!Number.isFinite(loss)) {
          failed = true;
          break;
        }
      }
      log(
        `model ${spec.modelId} epoch ${epoch + 1}/${config.epochs} ` +
          `lr=${learningRate.toFixed(4)} loss=${lastLoss?.toFixed(4)}`
      );
    }

    const top1Error = failed ? null : evaluateTop1Error(net, evalSet, config.batchSize);
    return {
      modelId: spec.modelId,
      top1Error,
      failed,
      epochs: config.epochs,
      dataset: DATASET_NAME,
      finalLoss: lastLoss,
      coreParams: net.coreParamCount(),
      bnParams: net.bnParamCount(),
    };
  } finally {
    net.dispose();
    train.images.dispose();
    train.labels.dispose();
    evalSet.images.dispose();
    evalSet.labels.dispose();
  }
}

function shuffled(count: number, rng: Rng): number[] {
  const indices = Array.from({ length: count }, (_, i) => i);
  for (let i = count - 1; i > 0; i--) {
    const j = rng.int(i + 1);
    [indices[i], indices[j]] = [indices[j], indices[i]];
  }
  return indices;
}
