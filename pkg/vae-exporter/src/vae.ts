/** Small convolutional variational autoencoder.
 *
 * Encoder: five convolution layers followed by five dense layers ending in
 * the concatenated (mean, log-variance) pair; decoder: four dense layers
 * followed by four transposed convolutions back to the image. Widths are
 * kept small so the whole thing trains on a CPU in seconds.
 */

import * as tf from "@tensorflow/tfjs";

import { Dataset } from "./blobs";
import { Rand } from "./rand";

export interface TrainingConfig {
  latentDim: number;
  klCoefficient: number;
  epochs: number;
  batchSize: number;
  seed: number;
  learningRate?: number;
}

export function validateConfig(config: TrainingConfig): void {
  if (!Number.isInteger(config.latentDim) || config.latentDim < 1) {
    throw new Error(`latentDim must be a positive integer, got ${config.latentDim}`);
  }
  if (!(config.klCoefficient > 0)) {
    throw new Error(`klCoefficient must be positive, got ${config.klCoefficient}`);
  }
  if (!Number.isInteger(config.epochs) || config.epochs < 1) {
    throw new Error(`epochs must be a positive integer, got ${config.epochs}`);
  }
  if (!Number.isInteger(config.batchSize) || config.batchSize < 1) {
    throw new Error(`batchSize must be a positive integer, got ${config.batchSize}`);
  }
}

export class Vae {
  readonly latentDim: number;
  readonly imageSize: number;
  private readonly encoderLayers: tf.layers.Layer[];
  private readonly decoderDense: tf.layers.Layer[];
  private readonly decoderConv: tf.layers.Layer[];
  private readonly flatten: tf.layers.Layer;

  constructor(latentDim: number, imageSize: number, seed: number) {
    this.latentDim = latentDim;
    this.imageSize = imageSize;
    let next = seed;
    const init = () => tf.initializers.glorotUniform({ seed: next++ });

    const conv = (filters: number, strides: number) =>
      tf.layers.conv2d({
        filters,
        kernelSize: 3,
        strides,
        padding: "same",
        activation: "relu",
        kernelInitializer: init(),
      });
    const dense = (units: number, activation: "relu" | undefined) =>
      tf.layers.dense({ units, activation, kernelInitializer: init() });
    const deconv = (filters: number, activation: "relu" | "sigmoid") =>
      tf.layers.conv2dTranspose({
        filters,
        kernelSize: 3,
        strides: 2,
        padding: "same",
        activation,
        kernelInitializer: init(),
      });

    // 16 -> 8 -> 4 -> 2 -> 1 -> 1, then five dense layers down to (mu, logvar)
    this.encoderLayers = [
      conv(8, 2),
      conv(16, 2),
      conv(16, 2),
      conv(32, 2),
      conv(32, 1),
      dense(48, "relu"),
      dense(40, "relu"),
      dense(32, "relu"),
      dense(24, "relu"),
      dense(2 * latentDim, undefined),
    ];
    this.flatten = tf.layers.flatten();
    // four dense layers back up, then four transposed convolutions 1 -> 16
    this.decoderDense = [
      dense(24, "relu"),
      dense(32, "relu"),
      dense(48, "relu"),
      dense(32, "relu"),
    ];
    this.decoderConv = [deconv(32, "relu"), deconv(16, "relu"), deconv(8, "relu"), deconv(1, "sigmoid")];
  }

  /** (mean, logVariance) of the approximate posterior for a batch of images. */
  encode(images: tf.Tensor4D): { mean: tf.Tensor2D; logVar: tf.Tensor2D } {
    return tf.tidy(() => {
      let h: tf.Tensor = images;
      for (const layer of this.encoderLayers.slice(0, 5)) {
        h = layer.apply(h) as tf.Tensor;
      }
      h = this.flatten.apply(h) as tf.Tensor;
      for (const layer of this.encoderLayers.slice(5)) {
        h = layer.apply(h) as tf.Tensor;
      }
      const [mean, logVar] = tf.split(h as tf.Tensor2D, 2, 1);
      return { mean: mean as tf.Tensor2D, logVar: logVar as tf.Tensor2D };
    });
  }

  decode(z: tf.Tensor2D): tf.Tensor4D {
    return tf.tidy(() => {
      let h: tf.Tensor = z;
      for (const layer of this.decoderDense) {
        h = layer.apply(h) as tf.Tensor;
      }
      h = tf.reshape(h, [-1, 1, 1, 32]);
      for (const layer of this.decoderConv) {
        h = layer.apply(h) as tf.Tensor;
      }
      return h as tf.Tensor4D;
    });
  }

  /** Reconstruction + scaled divergence loss for one batch. */
  loss(images: tf.Tensor4D, klCoefficient: number, noise: tf.Tensor2D): tf.Scalar {
    return tf.tidy(() => {
      const { mean, logVar } = this.encode(images);
      const z = tf.add(mean, tf.mul(noise, tf.exp(tf.mul(logVar, 0.5)))) as tf.Tensor2D;
      const recon = this.decode(z);
      const reconLoss = tf.mean(tf.sum(tf.square(tf.sub(recon, images)), [1, 2, 3]));
      const kl = klDivergence(mean, logVar);
      return tf.add(reconLoss, tf.mul(kl, klCoefficient)) as tf.Scalar;
    });
  }

  trainableVariables(): tf.Variable[] {
    const layers = [...this.encoderLayers, ...this.decoderDense, ...this.decoderConv];
    const vars: tf.Variable[] = [];
    for (const layer of layers) {
      for (const w of layer.trainableWeights) {
        vars.push(w.read() as unknown as tf.Variable);
      }
    }
    return vars;
  }
}

/** Mean over the batch of -0.5 * sum(1 + logVar - mean^2 - exp(logVar)). */
export function klDivergence(mean: tf.Tensor2D, logVar: tf.Tensor2D): tf.Scalar {
  return tf.tidy(() =>
    tf.mean(
      tf.mul(
        tf.sum(tf.sub(tf.add(1, logVar), tf.add(tf.square(mean), tf.exp(logVar))), 1),
        -0.5,
      ),
    ),
  ) as tf.Scalar;
}

function toTensor(dataset: Dataset, indices: number[]): tf.Tensor4D {
  const size = dataset.size;
  const data = new Float32Array(indices.length * size * size);
  indices.forEach((idx, row) => {
    data.set(dataset.images[idx], row * size * size);
  });
  return tf.tensor4d(data, [indices.length, size, size, 1]);
}

export interface TrainResult {
  vae: Vae;
  finalLoss: number;
}

/** Fit the model; throws if the loss diverges to NaN. */
export async function train(dataset: Dataset, config: TrainingConfig): Promise<TrainResult> {
  validateConfig(config);
  await tf.ready();
  const vae = new Vae(config.latentDim, dataset.size, config.seed);
  const rand = new Rand(config.seed ^ 0x5f3759df);
  const optimizer = tf.train.adam(config.learningRate ?? 1e-3);

  // one forward pass builds every layer so the optimizer can see the weights
  const warm = toTensor(dataset, [0]);
  const warmNoise = tf.zeros([1, config.latentDim]) as tf.Tensor2D;
  vae.loss(warm, config.klCoefficient, warmNoise).dispose();
  warm.dispose();
  warmNoise.dispose();

  const n = dataset.images.length;
  const order = Array.from({ length: n }, (_, i) => i);
  let lastLoss = Number.POSITIVE_INFINITY;

  for (let epoch = 0; epoch < config.epochs; epoch++) {
    // Fisher-Yates with the seeded generator
    for (let i = n - 1; i > 0; i--) {
      const j = rand.int(0, i + 1);
      [order[i], order[j]] = [order[j], order[i]];
    }
    for (let start = 0; start < n; start += config.batchSize) {
      const batchIdx = order.slice(start, start + config.batchSize);
      const batch = toTensor(dataset, batchIdx);
      const noiseData = new Float32Array(batchIdx.length * config.latentDim);
      for (let i = 0; i < noiseData.length; i++) noiseData[i] = rand.gaussian();
      const noise = tf.tensor2d(noiseData, [batchIdx.length, config.latentDim]);

      const lossTensor = optimizer.minimize(
        () => vae.loss(batch, config.klCoefficient, noise),
        true,
      ) as tf.Scalar;
      lastLoss = (await lossTensor.data())[0];
      lossTensor.dispose();
      batch.dispose();
      noise.dispose();

      if (!Number.isFinite(lastLoss)) {
        throw new Error(`training diverged: loss became ${lastLoss} at epoch ${epoch + 1}`);
      }
    }
  }
  optimizer.dispose();
  return { vae, finalLoss: lastLoss };
}

/** Encoder means for every image, as plain number arrays. */
export function encodeMeans(vae: Vae, dataset: Dataset, indices: number[]): number[][] {
  const out: number[][] = [];
  const chunk = 64;
  for (let start = 0; start < indices.length; start += chunk) {
    const slice = indices.slice(start, start + chunk);
    const batch = toTensor(dataset, slice);
    const { mean, logVar } = vae.encode(batch);
    const values = mean.arraySync() as number[][];
    out.push(...values);
    batch.dispose();
    mean.dispose();
    logVar.dispose();
  }
  return out;
}
