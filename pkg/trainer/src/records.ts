/**
 * Accuracy-record emission: the JSON-lines format the evaluation
 * pipeline's ingest command consumes. Failed runs are flagged, never
 * given an invented error value, and skipped on write.
 */

import { appendFileSync, writeFileSync } from "node:fs";

import type { TrainResult } from "./train.js";

export interface AccuracyRecord {
  model_id: string;
  dataset: string;
  epochs: number;
  top1_error: number;
  trainer: {
    recipe: string;
    core_params: number;
    bn_params: number;
    seed: number;
    failed?: boolean;
  };
}

export const RECIPE = "sgd-cosine-lr0.05-wd1e-4-b128";

export function toRecord(result: TrainResult, seed: number): AccuracyRecord | null {
  if (result.failed || result.top1Error == null) {
    return null;
  }
  return {
    model_id: result.modelId,
    dataset: result.dataset,
    epochs: result.epochs,
    top1_error: result.top1Error,
    trainer: {
      recipe: RECIPE,
      core_params: result.coreParams,
      bn_params: result.bnParams,
      seed,
    },
  };
}

export function writeRecords(path: string, records: AccuracyRecord[]): void {
  writeFileSync(path, records.map((r) => JSON.stringify(r)).join("\n") + (records.length ? "\n" : ""));
}

export function appendRecord(path: string, record: AccuracyRecord): void {
  appendFileSync(path, JSON.stringify(record) + "\n");
}
