/** Writers for the latent-model JSON and calibration CSV interchange formats
 * consumed by the latentcert toolkit, plus the train-and-export pipeline.
 */

import * as fs from "fs";
import * as path from "path";

import { Dataset, generateBlobs } from "./blobs";
import { loadImageDirectory } from "./images";
import { TrainingConfig, Vae, encodeMeans, train } from "./vae";

/** At least 17 significant digits, parseable by any JSON reader. */
export function formatFloat(x: number): string {
  if (!Number.isFinite(x)) {
    throw new Error(`cannot serialize non-finite value ${x}`);
  }
  return x.toExponential(16);
}

export interface LatentModelDoc {
  dim: number;
  mean: number[];
  covType: "diag" | "full";
  cov: number[] | number[][];
  label: string;
}

export function latentModelJson(doc: LatentModelDoc): string {
  const covText =
    doc.covType === "diag"
      ? `[${(doc.cov as number[]).map(formatFloat).join(", ")}]`
      : `[${(doc.cov as number[][]).map((row) => `[${row.map(formatFloat).join(", ")}]`).join(", ")}]`;
  return (
    "{\n" +
    `  "dim": ${doc.dim},\n` +
    `  "mean": [${doc.mean.map(formatFloat).join(", ")}],\n` +
    `  "cov_type": ${JSON.stringify(doc.covType)},\n` +
    `  "cov": ${covText},\n` +
    `  "label": ${JSON.stringify(doc.label)}\n` +
    "}\n"
  );
}

export function calibrationCsv(dim: number, rows: number[][]): string {
  const lines = [`dim=${dim}`];
  for (const row of rows) {
    if (row.length !== dim) {
      throw new Error(`calibration row has ${row.length} values, expected ${dim}`);
    }
    lines.push(row.map(formatFloat).join(","));
  }
  return lines.join("\n") + "\n";
}

function mean(rows: number[][], dim: number): number[] {
  const out = new Array(dim).fill(0);
  for (const row of rows) for (let j = 0; j < dim; j++) out[j] += row[j];
  return out.map((v) => v / rows.length);
}

function diagonalVariance(rows: number[][], center: number[], dim: number, floor: number): number[] {
  const out = new Array(dim).fill(0);
  for (const row of rows) {
    for (let j = 0; j < dim; j++) {
      const d = row[j] - center[j];
      out[j] += d * d;
    }
  }
  const denom = Math.max(1, rows.length - 1);
  return out.map((v) => Math.max(v / denom, floor));
}

function fullCovariance(rows: number[][], center: number[], dim: number, ridge: number): number[][] {
  const out: number[][] = Array.from({ length: dim }, () => new Array(dim).fill(0));
  for (const row of rows) {
    for (let a = 0; a < dim; a++) {
      const da = row[a] - center[a];
      for (let b = 0; b < dim; b++) {
        out[a][b] += da * (row[b] - center[b]);
      }
    }
  }
  const denom = Math.max(1, rows.length - 1);
  for (let a = 0; a < dim; a++) {
    for (let b = 0; b < dim; b++) out[a][b] /= denom;
    out[a][a] += ridge;
  }
  return out;
}

export interface ExportConfig extends TrainingConfig {
  dataSource: string; // "synthetic" or a directory of .png files
  trainCount: number; // synthetic source only
  calibrationCount: number;
  fullCovariance: boolean;
}

export const DEFAULTS = {
  latentDim: 16,
  klCoefficient: 2.2,
  epochs: 5,
  batchSize: 32,
  trainCount: 480,
  calibrationCount: 200,
  seed: 0,
  fullCovariance: false,
};

// Collapsed latent dimensions would make the covariance singular and the
// exported model unloadable; the floor keeps it positive definite.
const VARIANCE_FLOOR = 1e-6;

export interface ExportBundle {
  priorModelPath: string;
  aggregateModelPath: string;
  calibrationCsvPath: string;
  finalLoss: number;
}

export async function trainAndExport(config: ExportConfig, outDir: string): Promise<ExportBundle> {
  if (config.calibrationCount < 2) {
    throw new Error(`calibrationCount must be >= 2, got ${config.calibrationCount}`);
  }
  let dataset: Dataset;
  if (config.dataSource === "synthetic") {
    dataset = generateBlobs(config.trainCount + config.calibrationCount, config.seed);
  } else {
    dataset = loadImageDirectory(config.dataSource);
    if (dataset.images.length <= config.calibrationCount) {
      throw new Error(
        `need more than ${config.calibrationCount} images (calibration subset), got ${dataset.images.length}`,
      );
    }
  }
  const total = dataset.images.length;
  const trainIdx = Array.from({ length: total - config.calibrationCount }, (_, i) => i);
  const calIdx = Array.from({ length: config.calibrationCount }, (_, i) => total - config.calibrationCount + i);

  const { vae, finalLoss } = await train(
    { images: trainIdx.map((i) => dataset.images[i]), size: dataset.size },
    config,
  );

  const trainMeans = encodeMeans(vae, dataset, trainIdx);
  const calMeans = encodeMeans(vae, dataset, calIdx);
  for (const row of [...trainMeans, ...calMeans]) {
    if (!row.every(Number.isFinite)) {
      throw new Error("encoder produced non-finite latent values");
    }
  }

  const k = config.latentDim;
  const aggregateCenter = mean(trainMeans, k);

  fs.mkdirSync(outDir, { recursive: true });
  const priorModelPath = path.join(outDir, "prior_model.json");
  const aggregateModelPath = path.join(outDir, "aggregate_model.json");
  const calibrationCsvPath = path.join(outDir, "calibration.csv");

  fs.writeFileSync(
    priorModelPath,
    latentModelJson({
      dim: k,
      mean: new Array(k).fill(0),
      covType: "diag",
      cov: new Array(k).fill(1),
      label: "vae-prior",
    }),
  );

  fs.writeFileSync(
    aggregateModelPath,
    config.fullCovariance
      ? latentModelJson({
          dim: k,
          mean: aggregateCenter,
          covType: "full",
          cov: fullCovariance(trainMeans, aggregateCenter, k, VARIANCE_FLOOR),
          label: "vae-aggregate-posterior",
        })
      : latentModelJson({
          dim: k,
          mean: aggregateCenter,
          covType: "diag",
          cov: diagonalVariance(trainMeans, aggregateCenter, k, VARIANCE_FLOOR),
          label: "vae-aggregate-posterior",
        }),
  );

  fs.writeFileSync(calibrationCsvPath, calibrationCsv(k, calMeans));

  return { priorModelPath, aggregateModelPath, calibrationCsvPath, finalLoss };
}
