/** Command line: train the toy VAE and export latentcert-compatible files. */

import { DEFAULTS, ExportConfig, trainAndExport } from "./export";

const USAGE = `usage: vae-exporter --out-dir <dir> [options]

options:
  --data <dir|synthetic>     image source (default: synthetic)
  --latent-dim <int>         latent dimensions (default: ${DEFAULTS.latentDim})
  --kl-coefficient <float>   weight of the divergence term (default: ${DEFAULTS.klCoefficient})
  --epochs <int>             training epochs (default: ${DEFAULTS.epochs})
  --batch-size <int>         minibatch size (default: ${DEFAULTS.batchSize})
  --train-count <int>        synthetic training images (default: ${DEFAULTS.trainCount})
  --calibration-count <int>  held-out calibration subset size (default: ${DEFAULTS.calibrationCount})
  --seed <int>               dataset/initializer seed (default: ${DEFAULTS.seed})
  --full-covariance          export a full covariance for the aggregate model
  --help                     show this message

writes prior_model.json, aggregate_model.json and calibration.csv to --out-dir.`;

interface Parsed {
  config: ExportConfig;
  outDir: string;
}

export function parseArgs(argv: string[]): Parsed {
  const values = new Map<string, string>();
  let fullCovariance = false;
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    if (flag === "--help") {
      throw new HelpRequested();
    }
    if (flag === "--full-covariance") {
      fullCovariance = true;
      continue;
    }
    if (!flag.startsWith("--")) {
      throw new Error(`unexpected argument: ${flag}`);
    }
    const value = argv[++i];
    if (value === undefined) {
      throw new Error(`flag ${flag} needs a value`);
    }
    values.set(flag.slice(2), value);
  }
  const outDir = values.get("out-dir");
  if (!outDir) {
    throw new Error("--out-dir is required");
  }
  values.delete("out-dir");

  const num = (name: string, fallback: number): number => {
    const raw = values.get(name);
    if (raw === undefined) return fallback;
    values.delete(name);
    const parsed = Number(raw);
    if (!Number.isFinite(parsed)) {
      throw new Error(`flag --${name} must be numeric, got ${raw}`);
    }
    return parsed;
  };

  const dataSource = values.get("data") ?? "synthetic";
  values.delete("data");
  const config: ExportConfig = {
    dataSource,
    latentDim: num("latent-dim", DEFAULTS.latentDim),
    klCoefficient: num("kl-coefficient", DEFAULTS.klCoefficient),
    epochs: num("epochs", DEFAULTS.epochs),
    batchSize: num("batch-size", DEFAULTS.batchSize),
    trainCount: num("train-count", DEFAULTS.trainCount),
    calibrationCount: num("calibration-count", DEFAULTS.calibrationCount),
    seed: num("seed", DEFAULTS.seed),
    fullCovariance,
  };
  for (const key of values.keys()) {
    throw new Error(`unknown flag --${key}`);
  }
  return { config, outDir };
}

export class HelpRequested extends Error {}

async function main(): Promise<number> {
  let parsed: Parsed;
  try {
    parsed = parseArgs(process.argv.slice(2));
  } catch (err) {
    if (err instanceof HelpRequested) {
      console.log(USAGE);
      return 0;
    }
    console.error(`error: ${(err as Error).message}`);
    console.error(USAGE);
    return 2;
  }
  try {
    const bundle = await trainAndExport(parsed.config, parsed.outDir);
    console.log(`final loss ${bundle.finalLoss.toFixed(4)}`);
    console.log(bundle.priorModelPath);
    console.log(bundle.aggregateModelPath);
    console.log(bundle.calibrationCsvPath);
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (require.main === module) {
  main().then((code) => {
    process.exitCode = code;
  });
}
