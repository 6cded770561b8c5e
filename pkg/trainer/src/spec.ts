/**
 * Model-spec file contract.
 *
 * Spec files are produced by the `blockeval` sampling pipeline: a flat
 * layer list with resolved shapes, stage/block boundary indices, and the
 * input geometry. The file name (16 hex chars) is the model's content id
 * and must be carried through to the emitted accuracy records.
 */

import { readFileSync } from "node:fs";
import { basename } from "node:path";

export const SCHEMA_VERSION = 1;

export interface TensorShape {
  height: number;
  width: number;
  channels: number;
}

export type Activation = "none" | "relu" | "sigmoid";

export interface ConvLayer {
  kind: "conv";
  kernel_size: number;
  stride: number;
  in_channels: number;
  out_channels: number;
  groups: number;
  activation: Activation;
}

export interface SqueezeExciteLayer {
  kind: "squeeze_excite";
  channels: number;
  reduction_ratio: number;
}

export interface GlobalAvgPoolLayer {
  kind: "global_avg_pool";
}

export interface FullyConnectedLayer {
  kind: "fully_connected";
  in_channels: number;
  out_channels: number;
}

export interface AddLayer {
  kind: "add";
  channels: number;
}

export type LayerSpec =
  | ConvLayer
  | SqueezeExciteLayer
  | GlobalAvgPoolLayer
  | FullyConnectedLayer
  | AddLayer;

export interface NetworkSpec {
  modelId: string;
  input: TensorShape;
  numClasses: number;
  layers: LayerSpec[];
  blockBoundaries: number[];
  stageBoundaries: number[];
  family: string | null;
}

const MODEL_ID = /^[0-9a-f]{16}$/;

function fail(file: string, message: string): never {
  throw new Error(`${file}: ${message}`);
}

function asPositiveInt(file: string, field: string, value: unknown): number {
  if (typeof value !== "number" || !Number.isInteger(value) || value < 1) {
    fail(file, `${field} must be a positive integer, got ${JSON.stringify(value)}`);
  }
  return value;
}

function parseShape(file: string, raw: unknown): TensorShape {
  const data = raw as Record<string, unknown>;
  return {
    height: asPositiveInt(file, "shape.height", data?.height),
    width: asPositiveInt(file, "shape.width", data?.width),
    channels: asPositiveInt(file, "shape.channels", data?.channels),
  };
}

function parseLayer(file: string, index: number, raw: Record<string, unknown>): LayerSpec {
  const where = `layers[${index}]`;
  switch (raw.kind) {
    case "conv": {
      const activation = raw.activation;
      if (activation !== "none" && activation !== "relu" && activation !== "sigmoid") {
        fail(file, `${where}: unknown activation ${JSON.stringify(activation)}`);
      }
      return {
        kind: "conv",
        kernel_size: asPositiveInt(file, `${where}.kernel_size`, raw.kernel_size),
        stride: asPositiveInt(file, `${where}.stride`, raw.stride),
        in_channels: asPositiveInt(file, `${where}.in_channels`, raw.in_channels),
        out_channels: asPositiveInt(file, `${where}.out_channels`, raw.out_channels),
        groups: asPositiveInt(file, `${where}.groups`, raw.groups),
        activation,
      };
    }
    case "squeeze_excite":
      return {
        kind: "squeeze_excite",
        channels: asPositiveInt(file, `${where}.channels`, raw.channels),
        reduction_ratio: asPositiveInt(file, `${where}.reduction_ratio`, raw.reduction_ratio),
      };
    case "global_avg_pool":
      return { kind: "global_avg_pool" };
    case "fully_connected":
      return {
        kind: "fully_connected",
        in_channels: asPositiveInt(file, `${where}.in_channels`, raw.in_channels),
        out_channels: asPositiveInt(file, `${where}.out_channels`, raw.out_channels),
      };
    case "add":
      return { kind: "add", channels: asPositiveInt(file, `${where}.channels`, raw.channels) };
    default:
      fail(file, `${where}: unsupported layer kind ${JSON.stringify(raw.kind)}`);
  }
}

export function parseNetworkSpec(file: string, text: string): NetworkSpec {
  let data: Record<string, unknown>;
  try {
    data = JSON.parse(text);
  } catch (err) {
    fail(file, `invalid JSON (${(err as Error).message})`);
  }
  if (data.schema_version !== SCHEMA_VERSION) {
    fail(file, `unsupported schema_version ${JSON.stringify(data.schema_version)}`);
  }
  const modelId = basename(file).replace(/\.json$/, "");
  if (!MODEL_ID.test(modelId)) {
    fail(file, `file name must be the 16-hex-char model id, got ${JSON.stringify(modelId)}`);
  }
  const rawLayers = data.layers;
  if (!Array.isArray(rawLayers) || rawLayers.length === 0) {
    fail(file, "layers must be a non-empty array");
  }
  const metadata = (data.metadata ?? {}) as Record<string, unknown>;
  return {
    modelId,
    input: parseShape(file, data.input),
    numClasses: asPositiveInt(file, "num_classes", data.num_classes),
    layers: rawLayers.map((raw, i) => parseLayer(file, i, raw as Record<string, unknown>)),
    blockBoundaries: (data.block_boundaries as number[] | undefined) ?? [],
    stageBoundaries: (data.stage_boundaries as number[] | undefined) ?? [],
    family: (metadata.family as string | null) ?? null,
  };
}

export function loadNetworkSpec(file: string): NetworkSpec {
  return parseNetworkSpec(file, readFileSync(file, "utf8"));
}
