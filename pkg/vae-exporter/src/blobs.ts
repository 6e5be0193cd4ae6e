/** Built-in synthetic image source: soft gaussian blobs on a dark field.
 *
 * Every image is a float array in [0, 1], row-major, one channel. The
 * generator is fully determined by its seed, so exports are reproducible.
 */

import { Rand } from "./rand";

export const IMAGE_SIZE = 16;

export interface Dataset {
  images: Float32Array[];
  size: number;
}

function renderBlobs(rand: Rand, size: number): Float32Array {
  const img = new Float32Array(size * size);
  const blobCount = rand.int(1, 4);
  for (let b = 0; b < blobCount; b++) {
    const cx = rand.uniform(0.2, 0.8) * size;
    const cy = rand.uniform(0.2, 0.8) * size;
    const sigma = rand.uniform(0.08, 0.25) * size;
    const amp = rand.uniform(0.5, 1.0);
    const inv = 1.0 / (2.0 * sigma * sigma);
    for (let y = 0; y < size; y++) {
      for (let x = 0; x < size; x++) {
        const d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        img[y * size + x] += amp * Math.exp(-d2 * inv);
      }
    }
  }
  for (let i = 0; i < img.length; i++) {
    img[i] = Math.min(1.0, img[i] + 0.02 * rand.next());
  }
  return img;
}

export function generateBlobs(count: number, seed: number, size: number = IMAGE_SIZE): Dataset {
  if (count < 1) throw new Error(`count must be >= 1, got ${count}`);
  const rand = new Rand(seed);
  const images: Float32Array[] = [];
  for (let i = 0; i < count; i++) {
    images.push(renderBlobs(rand, size));
  }
  return { images, size };
}
