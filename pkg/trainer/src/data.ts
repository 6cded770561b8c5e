/**
 * Synthetic two-class vision dataset ("synthetic-blobs-v1").
 *
 * Class 1 images contain one large bright blob; class 0 images contain
 * two small blobs with roughly the same total brightness, so the classes
 * are separable by shape, not by mean intensity. Everything sits on a
 * noisy background. The generator is fully seeded: the same (seed, size,
 * resolution) always yields the same tensors.
 */

import * as tf from "@tensorflow/tfjs";

import { Rng } from "./random.js";

export const DATASET_NAME = "synthetic-blobs-v1";

export interface Dataset {
  images: tf.Tensor4D; // [n, size, size, 3] in [0, 1]
  labels: tf.Tensor1D; // int32 0/1
  name: string;
}

function paintBlob(
  pixels: Float32Array,
  size: number,
  cx: number,
  cy: number,
  radius: number,
  intensity: number
): void {
  const r2 = radius * radius;
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      const d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      if (d2 <= 4 * r2) {
        const value = intensity * Math.exp(-d2 / (2 * r2));
        const base = (y * size + x) * 3;
        pixels[base] += value;
        pixels[base + 1] += value;
        pixels[base + 2] += value;
      }
    }
  }
}

function renderImage(rng: Rng, size: number, label: number): Float32Array {
  const pixels = new Float32Array(size * size * 3);
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = 0.25 + 0.12 * rng.normal();
  }
  const margin = size / 4;
  if (label === 1) {
    const radius = rng.uniform(size / 8, size / 5);
    paintBlob(
      pixels,
      size,
      rng.uniform(margin, size - margin),
      rng.uniform(margin, size - margin),
      radius,
      0.6
    );
  } else {
    for (let b = 0; b < 2; b++) {
      const radius = rng.uniform(size / 16, size / 10);
      paintBlob(
        pixels,
        size,
        rng.uniform(margin, size - margin),
        rng.uniform(margin, size - margin),
        radius,
        0.85
      );
    }
  }
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = Math.min(Math.max(pixels[i], 0), 1);
  }
  return pixels;
}

export function makeDataset(size: number, count: number, seed: number): Dataset {
  const rng = new Rng(seed).derive(`blobs-${size}`);
  const data = new Float32Array(count * size * size * 3);
  const labels = new Int32Array(count);
  for (let i = 0; i < count; i++) {
    const label = i % 2; // balanced classes
    labels[i] = label;
    data.set(renderImage(rng, size, label), i * size * size * 3);
  }
  return {
    images: tf.tensor4d(data, [count, size, size, 3]),
    labels: tf.tensor1d(labels, "int32"),
    name: DATASET_NAME,
  };
}

/** Random horizontal flip + random crop (4px pad), the declared recipe. */
export function augmentBatch(images: tf.Tensor4D, rng: Rng): tf.Tensor4D {
  return tf.tidy(() => {
    const [n, h, w] = images.shape;
    const pad = 4;
    const padded = tf.pad(images, [
      [0, 0],
      [pad, pad],
      [pad, pad],
      [0, 0],
    ]);
    const rows: tf.Tensor4D[] = [];
    for (let i = 0; i < n; i++) {
      let img = tf.slice(
        padded,
        [i, rng.int(2 * pad + 1), rng.int(2 * pad + 1), 0],
        [1, h, w, 3]
      ) as tf.Tensor4D;
      if (rng.next() < 0.5) {
        img = tf.reverse(img, [2]);
      }
      rows.push(img);
    }
    return tf.concat(rows, 0) as tf.Tensor4D;
  });
}
