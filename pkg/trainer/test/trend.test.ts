/**
 * Capacity sanity trend at full desk scale: a deeper/wider model should
 * reach a lower-or-equal top-1 error than the minimal model in the median
 * over three seeds after the full 10-epoch recipe. Roughly half an hour
 * of CPU, so it only runs when RUN_SLOW is set:
 *
 *   RUN_SLOW=1 npx vitest run test/trend.test.ts
 */

import { readdirSync, readFileSync } from "node:fs";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import * as tf from "@tensorflow/tfjs";
import { beforeAll, describe, expect, it } from "vitest";

import { loadNetworkSpec } from "../src/spec.js";
import { DEFAULT_CONFIG, trainNetwork } from "../src/train.js";

const FIXTURES = join(fileURLToPath(new URL(".", import.meta.url)), "fixtures");
const meta = JSON.parse(readFileSync(join(FIXTURES, "expected.json"), "utf8"));

const DESK = { ...DEFAULT_CONFIG, trainSize: 1024, evalSize: 256 };

function median(values: number[]): number {
  const sorted = [...values].sort((a, b) => a - b);
  return sorted[Math.floor(sorted.length / 2)];
}

beforeAll(async () => {
  await tf.ready();
});

describe.skipIf(!process.env.RUN_SLOW)("capacity trend over full desk runs", () => {
  it("larger model matches or beats the minimal one in median error", () => {
    const tinySpec = loadNetworkSpec(join(FIXTURES, `${meta.tiny_net.model_id}.json`));
    // pick a clearly larger fixture (closest to ~6x the tiny param count)
    const target = meta.tiny_net.params * 6;
    const expected = meta.expected as Record<string, { params: number }>;
    const largerId = Object.keys(expected).reduce((best, id) =>
      Math.abs(expected[id].params - target) < Math.abs(expected[best].params - target)
        ? id
        : best
    );
    const largerSpec = loadNetworkSpec(join(FIXTURES, "specs", `${largerId}.json`));
    expect(expected[largerId].params).toBeGreaterThan(2 * meta.tiny_net.params);

    const tinyErrors: number[] = [];
    const largerErrors: number[] = [];
    for (const seed of [1, 2, 3]) {
      const tiny = trainNetwork(tinySpec, { ...DESK, seed });
      const larger = trainNetwork(largerSpec, { ...DESK, seed });
      expect(tiny.failed).toBe(false);
      expect(larger.failed).toBe(false);
      tinyErrors.push(tiny.top1Error!);
      largerErrors.push(larger.top1Error!);
      console.log(
        `seed ${seed}: tiny ${tiny.top1Error!.toFixed(4)} ` +
          `larger ${larger.top1Error!.toFixed(4)}`
      );
    }
    expect(median(largerErrors)).toBeLessThanOrEqual(median(tinyErrors));
  }, 3_600_000);
});
