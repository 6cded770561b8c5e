#!/usr/bin/env node
/**
 * Train every spec file in a directory and emit accuracy records.
 *
 *   blockeval-trainer --specs runs/demo/specs --out records.jsonl
 *
 * Flags mirror the trainer configuration (epochs, learning rate, weight
 * decay, batch size, dataset sizes, seed).
 */

import { readdirSync, statSync } from "node:fs";
import { join } from "node:path";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { loadNetworkSpec } from "./spec.js";
import { DEFAULT_CONFIG, trainNetwork } from "./train.js";
import { appendRecord, toRecord, writeRecords } from "./records.js";

function collectSpecFiles(root: string): string[] {
  const out: string[] = [];
  const walk = (dir: string) => {
    for (const entry of readdirSync(dir).sort()) {
      const path = join(dir, entry);
      if (statSync(path).isDirectory()) {
        walk(path);
      } else if (entry.endsWith(".json") && entry !== "manifest.json") {
        out.push(path);
      }
    }
  };
  if (statSync(root).isDirectory()) {
    walk(root);
  } else {
    out.push(root);
  }
  return out;
}

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .option("specs", { type: "string", demandOption: true, describe: "spec file or directory" })
    .option("out", { type: "string", demandOption: true, describe: "output records file (JSONL)" })
    .option("epochs", { type: "number", default: DEFAULT_CONFIG.epochs })
    .option("learning-rate", { type: "number", default: DEFAULT_CONFIG.learningRate })
    .option("weight-decay", { type: "number", default: DEFAULT_CONFIG.weightDecay })
    .option("batch-size", { type: "number", default: DEFAULT_CONFIG.batchSize })
    .option("train-size", { type: "number", default: DEFAULT_CONFIG.trainSize })
    .option("eval-size", { type: "number", default: DEFAULT_CONFIG.evalSize })
    .option("seed", { type: "number", default: 0 })
    .option("no-augment", { type: "boolean", default: false })
    .strict()
    .parse();

  const files = collectSpecFiles(argv.specs);
  if (files.length === 0) {
    console.error(`no spec files under ${argv.specs}`);
    return 2;
  }
  const config = {
    epochs: argv.epochs,
    learningRate: argv["learning-rate"],
    weightDecay: argv["weight-decay"],
    batchSize: argv["batch-size"],
    trainSize: argv["train-size"],
    evalSize: argv["eval-size"],
    seed: argv.seed,
    augment: !argv["no-augment"],
  };

  writeRecords(argv.out, []);
  let failures = 0;
  for (const [index, file] of files.entries()) {
    const spec = loadNetworkSpec(file);
    console.log(`[${index + 1}/${files.length}] training ${spec.modelId} ` +
      `(${spec.layers.length} layers, ${spec.input.height}x${spec.input.width})`);
    const started = Date.now();
    const result = trainNetwork(spec, config, (line) => console.log("  " + line));
    const seconds = ((Date.now() - started) / 1000).toFixed(1);
    const record = toRecord(result, config.seed);
    if (record == null) {
      failures += 1;
      console.error(`  model ${spec.modelId} diverged (loss NaN); no record emitted`);
      continue;
    }
    appendRecord(argv.out, record);
    console.log(`  top-1 error ${record.top1_error.toFixed(4)} in ${seconds}s`);
  }
  console.log(`wrote ${files.length - failures} records to ${argv.out}` +
    (failures ? ` (${failures} diverged)` : ""));
  return 0;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(err instanceof Error ? err.message : err);
    process.exit(1);
  }
);
