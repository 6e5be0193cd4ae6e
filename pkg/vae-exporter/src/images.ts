/** PNG directory loading for training on real images. Files are converted
 * to grayscale in [0, 1] and nearest-neighbor resized to the working size.
 */

import * as fs from "fs";
import * as path from "path";
import { PNG } from "pngjs";

import { Dataset, IMAGE_SIZE } from "./blobs";

function toGrayscale(png: PNG): Float32Array {
  const out = new Float32Array(png.width * png.height);
  for (let i = 0; i < png.width * png.height; i++) {
    const r = png.data[4 * i];
    const g = png.data[4 * i + 1];
    const b = png.data[4 * i + 2];
    out[i] = (r + g + b) / (3 * 255);
  }
  return out;
}

function resizeNearest(src: Float32Array, w: number, h: number, size: number): Float32Array {
  if (w === size && h === size) return src;
  const out = new Float32Array(size * size);
  for (let y = 0; y < size; y++) {
    const sy = Math.min(h - 1, Math.floor((y * h) / size));
    for (let x = 0; x < size; x++) {
      const sx = Math.min(w - 1, Math.floor((x * w) / size));
      out[y * size + x] = src[sy * w + sx];
    }
  }
  return out;
}

export function loadImageDirectory(dir: string, size: number = IMAGE_SIZE): Dataset {
  const names = fs
    .readdirSync(dir)
    .filter((n) => n.toLowerCase().endsWith(".png"))
    .sort();
  if (names.length === 0) {
    throw new Error(`no .png files found in ${dir}`);
  }
  const images = names.map((name) => {
    const png = PNG.sync.read(fs.readFileSync(path.join(dir, name)));
    return resizeNearest(toGrayscale(png), png.width, png.height, size);
  });
  return { images, size };
}
