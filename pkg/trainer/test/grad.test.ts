/**
 * Numerical checks for the hand-written conv / batch-norm kernels against
 * tf's reference ops and autodiff on small tensors. The custom ops use
 * centered padding, so references pad explicitly and convolve "valid".
 */

import * as tf from "@tensorflow/tfjs";
import { beforeAll, describe, expect, it } from "vitest";

import { BatchNorm, Network } from "../src/model.js";
import type { NetworkSpec } from "../src/spec.js";

beforeAll(async () => {
  await tf.ready();
});

function maxAbsDiff(a: tf.Tensor, b: tf.Tensor): number {
  return tf.max(tf.abs(tf.sub(a, b))).dataSync()[0];
}

/** Single-conv network so tests can drive one custom op in isolation. */
function singleConvNet(layer: Record<string, unknown>, input: { height: number; width: number; channels: number }): Network {
  const spec: NetworkSpec = {
    modelId: "deadbeef00000000",
    input,
    numClasses: 2,
    layers: [layer as never],
    blockBoundaries: [0],
    stageBoundaries: [0],
    family: null,
  };
  return new Network(spec, 3);
}

function convLayer(k: number, stride: number, cin: number, cout: number, groups = 1) {
  return {
    kind: "conv",
    kernel_size: k,
    stride,
    in_channels: cin,
    out_channels: cout,
    groups,
    activation: "none",
  };
}

/** Forward through just the conv (bypassing BN) via gamma=1, beta=0 init. */
function runConv(net: Network, x: tf.Tensor4D): tf.Tensor4D {
  // freshly built BatchNorm starts as identity on normalized input; to
  // isolate the conv we evaluate in inference mode with moving stats
  // (mean 0, var 1), which reduces BN to a near-identity (eps only).
  return net.forward(x, false) as unknown as tf.Tensor4D;
}

function referenceConv(
  x: tf.Tensor4D,
  kernel: tf.Tensor4D,
  k: number,
  stride: number,
  depthwise: boolean
): tf.Tensor4D {
  const pad = (k - 1) / 2;
  const padded = tf.pad(x, [
    [0, 0],
    [pad, pad],
    [pad, pad],
    [0, 0],
  ]) as tf.Tensor4D;
  return depthwise
    ? tf.depthwiseConv2d(padded, kernel as never, [stride, stride], "valid")
    : tf.conv2d(padded, kernel as never, [stride, stride], "valid");
}

describe("custom conv forward equals the padded reference conv", () => {
  const cases: Array<[number, number, number, number, number, boolean]> = [
    // k, stride, cin, cout, groups, depthwise
    [3, 1, 4, 6, 1, false],
    [3, 2, 4, 6, 1, false],
    [5, 1, 3, 4, 1, false],
    [1, 2, 4, 8, 1, false],
    [3, 1, 6, 6, 6, true],
    [3, 2, 6, 6, 6, true],
    [3, 1, 8, 12, 4, false], // grouped via per-group reference
  ];

  for (const [k, stride, cin, cout, groups, depthwise] of cases) {
    it(`k=${k} stride=${stride} ${cin}->${cout} g=${groups}`, () => {
      const net = singleConvNet(convLayer(k, stride, cin, cout, groups), {
        height: 9,
        width: 7,
        channels: cin,
      });
      const x = tf.randomNormal([2, 9, 7, cin], 0, 1, "float32", 11) as tf.Tensor4D;
      const mine = runConv(net, x);

      const kernels = net
        .trainableVariables()
        .filter((v) => v.shape.length === 4) as unknown as tf.Tensor4D[];
      let expected: tf.Tensor4D;
      if (depthwise) {
        expected = referenceConv(x, kernels[0], k, stride, true);
      } else if (groups === 1) {
        expected = referenceConv(x, kernels[0], k, stride, false);
      } else {
        const slices = tf.split(x, groups, 3);
        expected = tf.concat(
          slices.map((s, g) => referenceConv(s as tf.Tensor4D, kernels[g], k, stride, false)),
          3
        ) as tf.Tensor4D;
      }
      // inference-mode batch norm with fresh moving stats is x / sqrt(1+eps)
      const bnScale = 1 / Math.sqrt(1 + 1e-5);
      expect(maxAbsDiff(mine, tf.mul(expected, bnScale))).toBeLessThan(1e-4);
      net.dispose();
    });
  }
});

describe("custom gradients match autodiff through the reference ops", () => {
  function gradCase(k: number, stride: number, cin: number, cout: number, groups: number, depthwise: boolean) {
    const h = 6;
    const w = 5;
    const net = singleConvNet(convLayer(k, stride, cin, cout, groups), {
      height: h,
      width: w,
      channels: cin,
    });
    const kernels = net
      .trainableVariables()
      .filter((v) => v.shape.length === 4);
    const x = tf.randomNormal([2, h, w, cin], 0, 1, "float32", 5) as tf.Tensor4D;
    const probe = tf.randomNormal(
      [2, Math.ceil(h / stride), Math.ceil(w / stride), cout],
      0,
      1,
      "float32",
      6
    );

    const mineGrads = tf.variableGrads(() => {
      const y = net.forward(x, false);
      return tf.sum(tf.mul(y as unknown as tf.Tensor, probe)) as tf.Scalar;
    }, kernels as never);

    const bnScale = 1 / Math.sqrt(1 + 1e-5);
    const refGrads = tf.grads((...ks: tf.Tensor[]) => {
      let y: tf.Tensor4D;
      if (depthwise) {
        y = referenceConv(x, ks[0] as tf.Tensor4D, k, stride, true);
      } else if (groups === 1) {
        y = referenceConv(x, ks[0] as tf.Tensor4D, k, stride, false);
      } else {
        const slices = tf.split(x, groups, 3);
        y = tf.concat(
          slices.map((s, g) => referenceConv(s as tf.Tensor4D, ks[g] as tf.Tensor4D, k, stride, false)),
          3
        ) as tf.Tensor4D;
      }
      return tf.sum(tf.mul(tf.mul(y, bnScale), probe));
    })(kernels.map((v) => v as unknown as tf.Tensor));

    kernels.forEach((kernel, i) => {
      const mine = mineGrads.grads[kernel.name];
      expect(maxAbsDiff(mine, refGrads[i])).toBeLessThan(1e-3);
    });
    net.dispose();
  }

  it("standard conv kernel gradient", () => gradCase(3, 1, 4, 6, 1, false));
  it("strided conv kernel gradient", () => gradCase(3, 2, 4, 6, 1, false));
  it("depthwise kernel gradient", () => gradCase(3, 1, 6, 6, 6, true));
  it("strided depthwise kernel gradient", () => gradCase(3, 2, 6, 6, 6, true));
  it("grouped kernel gradients", () => gradCase(3, 1, 8, 12, 4, false));
});

describe("custom batch norm", () => {
  it("training-mode forward and gradients match the composed formula", () => {
    const c = 5;
    const x = tf.randomNormal([4, 3, 3, c], 1.5, 2.0, "float32", 9) as tf.Tensor4D;
    const gamma = tf.variable(tf.randomNormal([c], 1, 0.2, "float32", 10));
    const beta = tf.variable(tf.randomNormal([c], 0, 0.2, "float32", 11));
    const probe = tf.randomNormal([4, 3, 3, c], 0, 1, "float32", 12);

    // reference: explicit normalization, autodiff through moments
    const reference = (xt: tf.Tensor, g: tf.Tensor, b: tf.Tensor) => {
      const { mean, variance } = tf.moments(xt, [0, 1, 2]);
      const xhat = tf.div(tf.sub(xt, mean), tf.sqrt(tf.add(variance, 1e-5)));
      return tf.sum(tf.mul(tf.add(tf.mul(xhat, g), b), probe));
    };
    const refValue = reference(x, gamma, beta);
    const refGrads = tf.grads(reference)([x, gamma as unknown as tf.Tensor, beta as unknown as tf.Tensor]);

    const bn = new BatchNorm(c);
    bn.gamma.assign(gamma);
    bn.beta.assign(beta);
    const mineGrads = tf.variableGrads(() => {
      const y = bn.apply(x, true);
      return tf.sum(tf.mul(y, probe)) as tf.Scalar;
    }, [bn.gamma, bn.beta]);
    const xGrad = tf.grad((xt: tf.Tensor) => tf.sum(tf.mul(bn.apply(xt as tf.Tensor4D, true), probe)))(x);

    expect(Math.abs(mineGrads.value.dataSync()[0] - refValue.dataSync()[0])).toBeLessThan(1e-2);
    expect(maxAbsDiff(mineGrads.grads[bn.gamma.name], refGrads[1])).toBeLessThan(1e-3);
    expect(maxAbsDiff(mineGrads.grads[bn.beta.name], refGrads[2])).toBeLessThan(1e-3);
    expect(maxAbsDiff(xGrad, refGrads[0])).toBeLessThan(1e-3);
  });

  it("updates moving statistics toward the batch statistics", () => {
    const bn = new BatchNorm(2);
    const x = tf.tensor4d(
      new Float32Array([2, 10, 2, 10, 2, 10, 2, 10]),
      [2, 1, 2, 2]
    );
    bn.apply(x, true);
    const mean = Array.from(bn.movingMean.dataSync());
    expect(mean[0]).toBeCloseTo(0.9 * 0 + 0.1 * 2, 5);
    expect(mean[1]).toBeCloseTo(0.9 * 0 + 0.1 * 10, 5);
  });
});
