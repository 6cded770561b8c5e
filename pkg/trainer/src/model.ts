/**
 * Executable networks built from spec files.
 *
 * Layer semantics mirror the cost model's conventions: convolutions are
 * bias free, the squeeze-excite gate is two bias-free linear maps around
 * a global average pool, the classifier head is a single bias-free
 * linear layer. Batch norm follows every convolution for trainability;
 * its parameters are tracked separately so the core parameter count
 * stays exactly comparable with the analytic `params` metric.
 */

import * as tf from "@tensorflow/tfjs";

import { Rng } from "./random.js";
import type { ConvLayer, LayerSpec, NetworkSpec, SqueezeExciteLayer } from "./spec.js";

const BN_MOMENTUM = 0.9;
const BN_EPSILON = 1e-5;

function heNormal(rng: Rng, shape: number[], fanIn: number): tf.Tensor {
  const size = shape.reduce((a, b) => a * b, 1);
  const std = Math.sqrt(2 / fanIn);
  const values = new Float32Array(size);
  for (let i = 0; i < size; i++) {
    values[i] = rng.normal() * std;
  }
  return tf.tensor(values, shape);
}

/**
 * Batch normalization as a single custom op.
 *
 * The composed tf ops would broadcast [C] parameters over [B, H, W, C]
 * activations in both directions; the pure-JS backend's broadcast path is
 * far too slow for that, so forward and backward are typed-array loops.
 */
export class BatchNorm {
  readonly gamma: tf.Variable;
  readonly beta: tf.Variable;
  readonly movingMean: tf.Variable;
  readonly movingVar: tf.Variable;

  constructor(channels: number) {
    this.gamma = tf.variable(tf.ones([channels]), true);
    this.beta = tf.variable(tf.zeros([channels]), true);
    this.movingMean = tf.variable(tf.zeros([channels]), false);
    this.movingVar = tf.variable(tf.ones([channels]), false);
  }

  apply(x: tf.Tensor4D, training: boolean): tf.Tensor4D {
    const [b, h, w, c] = x.shape;
    const n = b * h * w;
    const useBatchStats = training;
    const movingMeanData = this.movingMean.dataSync() as Float32Array;
    const movingVarData = this.movingVar.dataSync() as Float32Array;
    let batchMean: Float32Array | null = null;
    let batchVar: Float32Array | null = null;

    const op = tf.customGrad((xt, gammaT, betaT, save) => {
      const data = (xt as tf.Tensor).dataSync() as Float32Array;
      const gamma = (gammaT as tf.Tensor).dataSync() as Float32Array;
      const beta = (betaT as tf.Tensor).dataSync() as Float32Array;

      const mean = new Float32Array(c);
      const variance = new Float32Array(c);
      if (useBatchStats) {
        for (let i = 0; i < data.length; i += c) {
          for (let ci = 0; ci < c; ci++) mean[ci] += data[i + ci];
        }
        for (let ci = 0; ci < c; ci++) mean[ci] /= n;
        for (let i = 0; i < data.length; i += c) {
          for (let ci = 0; ci < c; ci++) {
            const d = data[i + ci] - mean[ci];
            variance[ci] += d * d;
          }
        }
        for (let ci = 0; ci < c; ci++) variance[ci] /= n;
        batchMean = mean;
        batchVar = variance;
      } else {
        mean.set(movingMeanData);
        variance.set(movingVarData);
      }

      const invStd = new Float32Array(c);
      for (let ci = 0; ci < c; ci++) invStd[ci] = 1 / Math.sqrt(variance[ci] + BN_EPSILON);
      const xhat = new Float32Array(data.length);
      const out = new Float32Array(data.length);
      for (let i = 0; i < data.length; i += c) {
        for (let ci = 0; ci < c; ci++) {
          const normalized = (data[i + ci] - mean[ci]) * invStd[ci];
          xhat[i + ci] = normalized;
          out[i + ci] = normalized * gamma[ci] + beta[ci];
        }
      }
      (save as tf.GradSaveFunc)([]);

      const gradFunc = (dy: tf.Tensor) => {
        const dyData = dy.dataSync() as Float32Array;
        const dGamma = new Float32Array(c);
        const dBeta = new Float32Array(c);
        for (let i = 0; i < dyData.length; i += c) {
          for (let ci = 0; ci < c; ci++) {
            dGamma[ci] += dyData[i + ci] * xhat[i + ci];
            dBeta[ci] += dyData[i + ci];
          }
        }
        const dx = new Float32Array(dyData.length);
        if (useBatchStats) {
          // dx = invStd * gamma * (dy - mean(dy) - xhat * mean(dy * xhat))
          for (let i = 0; i < dyData.length; i += c) {
            for (let ci = 0; ci < c; ci++) {
              dx[i + ci] =
                invStd[ci] * gamma[ci] *
                (dyData[i + ci] - dBeta[ci] / n - (xhat[i + ci] * dGamma[ci]) / n);
            }
          }
        } else {
          for (let i = 0; i < dyData.length; i += c) {
            for (let ci = 0; ci < c; ci++) {
              dx[i + ci] = invStd[ci] * gamma[ci] * dyData[i + ci];
            }
          }
        }
        return [
          tf.tensor4d(dx, [b, h, w, c]),
          tf.tensor1d(dGamma),
          tf.tensor1d(dBeta),
        ];
      };
      return { value: tf.tensor4d(out, [b, h, w, c]), gradFunc };
    });

    const result = op(
      x,
      this.gamma as unknown as tf.Tensor,
      this.beta as unknown as tf.Tensor
    ) as tf.Tensor4D;

    if (useBatchStats && batchMean != null && batchVar != null) {
      const updatedMean = new Float32Array(c);
      const updatedVar = new Float32Array(c);
      for (let ci = 0; ci < c; ci++) {
        updatedMean[ci] =
          movingMeanData[ci] * BN_MOMENTUM + (batchMean as Float32Array)[ci] * (1 - BN_MOMENTUM);
        updatedVar[ci] =
          movingVarData[ci] * BN_MOMENTUM + (batchVar as Float32Array)[ci] * (1 - BN_MOMENTUM);
      }
      this.movingMean.assign(tf.tensor1d(updatedMean));
      this.movingVar.assign(tf.tensor1d(updatedVar));
    }
    return result;
  }

  variables(): tf.Variable[] {
    return [this.gamma, this.beta, this.movingMean, this.movingVar];
  }
}

interface ConvOp {
  kind: "conv";
  spec: ConvLayer;
  kernels: tf.Variable[]; // one per group
  bn: BatchNorm;
}

interface SeOp {
  kind: "se";
  spec: SqueezeExciteLayer;
  reduce: tf.Variable; // [C, C/r]
  expand: tf.Variable; // [C/r, C]
}

interface GapOp {
  kind: "gap";
}

interface FcOp {
  kind: "fc";
  weight: tf.Variable; // [C_in, C_out]
}

interface AddOp {
  kind: "add";
}

type Op = ConvOp | SeOp | GapOp | FcOp | AddOp;

function activate(x: tf.Tensor, activation: string): tf.Tensor {
  if (activation === "relu") return tf.relu(x);
  if (activation === "sigmoid") return tf.sigmoid(x);
  return x;
}

export class Network {
  readonly spec: NetworkSpec;
  private readonly ops: Op[];

  constructor(spec: NetworkSpec, seed = 0) {
    this.spec = spec;
    const rng = new Rng(seed).derive(spec.modelId);
    this.ops = spec.layers.map((layer) => buildOp(layer, rng));
  }

  /** Logits for a [batch, H, W, C] image tensor. */
  forward(images: tf.Tensor4D, training = false): tf.Tensor2D {
    let x: tf.Tensor = images;
    const boundaries = this.spec.blockBoundaries;
    let nextBlock = 0;
    let blockInput: tf.Tensor = x;
    for (let i = 0; i < this.ops.length; i++) {
      if (nextBlock < boundaries.length && boundaries[nextBlock] === i) {
        blockInput = x;
        nextBlock += 1;
      }
      const op = this.ops[i];
      switch (op.kind) {
        case "conv": {
          const conv = applyConv(op, x as tf.Tensor4D, training);
          x = activate(conv, op.spec.activation);
          break;
        }
        case "se": {
          const pooled = tf.mean(x as tf.Tensor4D, [1, 2]); // [B, C]
          const squeezed = tf.relu(tf.matMul(pooled as tf.Tensor2D, op.reduce as unknown as tf.Tensor2D));
          const gates = tf.sigmoid(tf.matMul(squeezed, op.expand as unknown as tf.Tensor2D));
          const shape = (x as tf.Tensor4D).shape;
          x = tf.mul(x, tf.reshape(gates, [shape[0], 1, 1, shape[3]]));
          break;
        }
        case "gap":
          x = tf.mean(x as tf.Tensor4D, [1, 2]); // [B, C]
          break;
        case "fc":
          x = tf.matMul(x as tf.Tensor2D, op.weight as unknown as tf.Tensor2D);
          break;
        case "add":
          x = tf.add(x, blockInput);
          break;
      }
    }
    return x as tf.Tensor2D;
  }

  /** All variables the optimizer updates (batch-norm included). */
  trainableVariables(): tf.Variable[] {
    const out: tf.Variable[] = [];
    for (const op of this.ops) {
      if (op.kind === "conv") {
        out.push(...op.kernels, op.bn.gamma, op.bn.beta);
      } else if (op.kind === "se") {
        out.push(op.reduce, op.expand);
      } else if (op.kind === "fc") {
        out.push(op.weight);
      }
    }
    return out;
  }

  /** Weight count comparable with the analytic params metric (no batch norm). */
  coreParamCount(): number {
    let total = 0;
    for (const op of this.ops) {
      if (op.kind === "conv") {
        total += op.kernels.reduce((acc, k) => acc + k.size, 0);
      } else if (op.kind === "se") {
        total += op.reduce.size + op.expand.size;
      } else if (op.kind === "fc") {
        total += op.weight.size;
      }
    }
    return total;
  }

  /** Batch-norm parameter count, reported separately from the core count. */
  bnParamCount(): number {
    let total = 0;
    for (const op of this.ops) {
      if (op.kind === "conv") {
        total += op.bn.gamma.size + op.bn.beta.size;
      }
    }
    return total;
  }

  dispose(): void {
    for (const op of this.ops) {
      if (op.kind === "conv") {
        op.kernels.forEach((k) => k.dispose());
        op.bn.variables().forEach((v) => v.dispose());
      } else if (op.kind === "se") {
        op.reduce.dispose();
        op.expand.dispose();
      } else if (op.kind === "fc") {
        op.weight.dispose();
      }
    }
  }
}

function buildOp(layer: LayerSpec, rng: Rng): Op {
  switch (layer.kind) {
    case "conv": {
      const { kernel_size: k, in_channels, out_channels, groups } = layer;
      const inPerGroup = in_channels / groups;
      const outPerGroup = out_channels / groups;
      if (!Number.isInteger(inPerGroup) || !Number.isInteger(outPerGroup)) {
        throw new Error(
          `conv ${in_channels}->${out_channels} groups=${groups}: uneven channel split`
        );
      }
      const fanIn = k * k * inPerGroup;
      const kernels: tf.Variable[] = [];
      if (groups === in_channels && outPerGroup === 1) {
        // depthwise kernel layout: [k, k, C, multiplier]
        kernels.push(tf.variable(heNormal(rng, [k, k, in_channels, 1], fanIn), true));
      } else {
        for (let g = 0; g < groups; g++) {
          kernels.push(
            tf.variable(heNormal(rng, [k, k, inPerGroup, outPerGroup], fanIn), true)
          );
        }
      }
      return { kind: "conv", spec: layer, kernels, bn: new BatchNorm(out_channels) };
    }
    case "squeeze_excite": {
      const { channels, reduction_ratio } = layer;
      const squeeze = channels / reduction_ratio;
      if (!Number.isInteger(squeeze)) {
        throw new Error(`squeeze_excite C=${channels} r=${reduction_ratio}: uneven squeeze`);
      }
      return {
        kind: "se",
        spec: layer,
        reduce: tf.variable(heNormal(rng, [channels, squeeze], channels), true),
        expand: tf.variable(heNormal(rng, [squeeze, channels], squeeze), true),
      };
    }
    case "global_avg_pool":
      return { kind: "gap" };
    case "fully_connected":
      return {
        kind: "fc",
        weight: tf.variable(
          heNormal(rng, [layer.in_channels, layer.out_channels], layer.in_channels),
          true
        ),
      };
    case "add":
      return { kind: "add" };
  }
}

// Convolutions are lowered onto an explicit patch matrix (im2col) feeding
// tf.matMul / broadcast-multiply, because the pure-JS backend's conv and
// slice kernels are orders of magnitude too slow to train with. The patch
// extraction and its col2im gradient are hand-written typed-array loops
// behind tf.customGrad. Output spatial size is ceil(n/stride), padding
// centered on (kernel_size - 1) / 2 ("same").

export function outputSize(n: number, stride: number): number {
  return Math.ceil(n / stride);
}

function im2col(
  x: Float32Array,
  b: number,
  h: number,
  w: number,
  c: number,
  k: number,
  stride: number,
  chanStart: number,
  chanCount: number
): Float32Array {
  const pad = (k - 1) >> 1;
  const ho = outputSize(h, stride);
  const wo = outputSize(w, stride);
  const out = new Float32Array(b * ho * wo * k * k * chanCount);
  let dst = 0;
  for (let bi = 0; bi < b; bi++) {
    const bBase = bi * h * w * c;
    for (let oy = 0; oy < ho; oy++) {
      const iy0 = oy * stride - pad;
      for (let ox = 0; ox < wo; ox++) {
        const ix0 = ox * stride - pad;
        for (let ky = 0; ky < k; ky++) {
          const iy = iy0 + ky;
          if (iy < 0 || iy >= h) {
            dst += k * chanCount;
            continue;
          }
          const rowBase = bBase + (iy * w) * c;
          for (let kx = 0; kx < k; kx++) {
            const ix = ix0 + kx;
            if (ix >= 0 && ix < w) {
              const src = rowBase + ix * c + chanStart;
              out.set(x.subarray(src, src + chanCount), dst);
            }
            dst += chanCount;
          }
        }
      }
    }
  }
  return out;
}

function col2im(
  dy: Float32Array,
  b: number,
  h: number,
  w: number,
  c: number,
  k: number,
  stride: number,
  chanStart: number,
  chanCount: number
): Float32Array {
  const pad = (k - 1) >> 1;
  const ho = outputSize(h, stride);
  const wo = outputSize(w, stride);
  const dx = new Float32Array(b * h * w * c);
  let src = 0;
  for (let bi = 0; bi < b; bi++) {
    const bBase = bi * h * w * c;
    for (let oy = 0; oy < ho; oy++) {
      const iy0 = oy * stride - pad;
      for (let ox = 0; ox < wo; ox++) {
        const ix0 = ox * stride - pad;
        for (let ky = 0; ky < k; ky++) {
          const iy = iy0 + ky;
          if (iy < 0 || iy >= h) {
            src += k * chanCount;
            continue;
          }
          const rowBase = bBase + (iy * w) * c;
          for (let kx = 0; kx < k; kx++) {
            const ix = ix0 + kx;
            if (ix >= 0 && ix < w) {
              const dstBase = rowBase + ix * c + chanStart;
              for (let ci = 0; ci < chanCount; ci++) {
                dx[dstBase + ci] += dy[src + ci];
              }
            }
            src += chanCount;
          }
        }
      }
    }
  }
  return dx;
}

/**
 * Patch matrix of one channel range: [b*ho*wo, k*k*chanCount], taps in
 * row-major order. Differentiable (col2im gradient).
 */
function patchMatrix(
  x: tf.Tensor4D,
  k: number,
  stride: number,
  chanStart: number,
  chanCount: number
): tf.Tensor2D {
  const [b, h, w, c] = x.shape;
  const op = tf.customGrad((input, save) => {
    const data = (input as tf.Tensor).dataSync() as Float32Array;
    const value = tf.tensor2d(
      im2col(data, b, h, w, c, k, stride, chanStart, chanCount),
      [b * outputSize(h, stride) * outputSize(w, stride), k * k * chanCount]
    );
    (save as tf.GradSaveFunc)([]);
    const gradFunc = (dy: tf.Tensor) => {
      const grad = col2im(
        dy.dataSync() as Float32Array,
        b, h, w, c, k, stride, chanStart, chanCount
      );
      return tf.tensor4d(grad, [b, h, w, c]);
    };
    return { value, gradFunc };
  });
  return op(x) as tf.Tensor2D;
}

/**
 * Depthwise convolution as one custom op (kernel [k, k, C, 1]), with
 * hand-written input and kernel gradients. Avoids the broadcasted
 * multiply/reduce formulation entirely.
 */
function depthwiseConvOp(x: tf.Tensor4D, kernel: tf.Tensor, k: number, stride: number): tf.Tensor4D {
  const [b, h, w, c] = x.shape;
  const ho = outputSize(h, stride);
  const wo = outputSize(w, stride);
  const pad = (k - 1) >> 1;

  const op = tf.customGrad((xt, wt, save) => {
    const data = (xt as tf.Tensor).dataSync() as Float32Array;
    const weights = (wt as tf.Tensor).dataSync() as Float32Array; // [k, k, c]
    const out = new Float32Array(b * ho * wo * c);
    let dst = 0;
    for (let bi = 0; bi < b; bi++) {
      const bBase = bi * h * w * c;
      for (let oy = 0; oy < ho; oy++) {
        const iy0 = oy * stride - pad;
        for (let ox = 0; ox < wo; ox++) {
          const ix0 = ox * stride - pad;
          for (let ky = 0; ky < k; ky++) {
            const iy = iy0 + ky;
            if (iy < 0 || iy >= h) continue;
            for (let kx = 0; kx < k; kx++) {
              const ix = ix0 + kx;
              if (ix < 0 || ix >= w) continue;
              const src = bBase + (iy * w + ix) * c;
              const tap = (ky * k + kx) * c;
              for (let ci = 0; ci < c; ci++) {
                out[dst + ci] += data[src + ci] * weights[tap + ci];
              }
            }
          }
          dst += c;
        }
      }
    }
    (save as tf.GradSaveFunc)([]);

    const gradFunc = (dy: tf.Tensor) => {
      const dyData = dy.dataSync() as Float32Array;
      const dx = new Float32Array(data.length);
      const dw = new Float32Array(weights.length);
      let src = 0;
      for (let bi = 0; bi < b; bi++) {
        const bBase = bi * h * w * c;
        for (let oy = 0; oy < ho; oy++) {
          const iy0 = oy * stride - pad;
          for (let ox = 0; ox < wo; ox++) {
            const ix0 = ox * stride - pad;
            for (let ky = 0; ky < k; ky++) {
              const iy = iy0 + ky;
              if (iy < 0 || iy >= h) continue;
              for (let kx = 0; kx < k; kx++) {
                const ix = ix0 + kx;
                if (ix < 0 || ix >= w) continue;
                const inBase = bBase + (iy * w + ix) * c;
                const tap = (ky * k + kx) * c;
                for (let ci = 0; ci < c; ci++) {
                  const g = dyData[src + ci];
                  dx[inBase + ci] += g * weights[tap + ci];
                  dw[tap + ci] += g * data[inBase + ci];
                }
              }
            }
            src += c;
          }
        }
      }
      return [
        tf.tensor4d(dx, [b, h, w, c]),
        tf.reshape(tf.tensor(dw, [k, k, c]), [k, k, c, 1]),
      ];
    };
    return { value: tf.tensor4d(out, [b, ho, wo, c]), gradFunc };
  });
  return op(x, kernel) as tf.Tensor4D;
}

function applyConv(op: ConvOp, x: tf.Tensor4D, training: boolean): tf.Tensor4D {
  const { kernel_size: k, stride, groups, in_channels, out_channels } = op.spec;
  const [b, h, w] = [x.shape[0], x.shape[1], x.shape[2]];
  const ho = outputSize(h, stride);
  const wo = outputSize(w, stride);
  let out: tf.Tensor4D;
  if (groups === in_channels && out_channels === in_channels) {
    out = depthwiseConvOp(x, op.kernels[0], k, stride);
  } else if (groups === 1 && k === 1 && stride === 1) {
    // pointwise fast path: plain matrix multiply
    const flat = tf.reshape(x, [b * h * w, in_channels]);
    const weights = tf.reshape(op.kernels[0], [in_channels, out_channels]);
    out = tf.reshape(tf.matMul(flat, weights), [b, h, w, out_channels]) as tf.Tensor4D;
  } else {
    const inPerGroup = in_channels / groups;
    const parts: tf.Tensor[] = [];
    for (let g = 0; g < groups; g++) {
      const patches = patchMatrix(x, k, stride, g * inPerGroup, inPerGroup);
      const weights = tf.reshape(op.kernels[g], [k * k * inPerGroup, -1]);
      parts.push(tf.matMul(patches, weights));
    }
    const flat = parts.length === 1 ? parts[0] : tf.concat(parts, 1);
    out = tf.reshape(flat, [b, ho, wo, out_channels]) as tf.Tensor4D;
  }
  return op.bn.apply(out, training);
}
