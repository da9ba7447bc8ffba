/** PNG loading, pixel-space Gaussian blur, and pixel-center bilinear resize. */

import { readFileSync, writeFileSync } from 'fs'
import { PNG } from 'pngjs'

/** Planar-free RGB image: values in [0, 255], row-major, channels last. */
export interface RgbImage {
  height: number
  width: number
  /** length = height * width * 3 */
  data: Float64Array
}

export function loadPng(path: string): RgbImage {
  const png = PNG.sync.read(readFileSync(path))
  const out = new Float64Array(png.height * png.width * 3)
  for (let p = 0; p < png.height * png.width; p++) {
    out[3 * p] = png.data[4 * p]
    out[3 * p + 1] = png.data[4 * p + 1]
    out[3 * p + 2] = png.data[4 * p + 2]
  }
  return { height: png.height, width: png.width, data: out }
}

export function savePng(image: RgbImage, path: string): void {
  const png = new PNG({ height: image.height, width: image.width })
  for (let p = 0; p < image.height * image.width; p++) {
    png.data[4 * p] = Math.round(image.data[3 * p])
    png.data[4 * p + 1] = Math.round(image.data[3 * p + 1])
    png.data[4 * p + 2] = Math.round(image.data[3 * p + 2])
    png.data[4 * p + 3] = 255
  }
  writeFileSync(path, PNG.sync.write(png))
}

/** Normalized 1-d Gaussian taps truncated at radius ceil(3 sigma). */
export function gaussianKernel(sigma: number): Float64Array {
  const radius = Math.ceil(3 * sigma)
  const taps = new Float64Array(2 * radius + 1)
  let sum = 0
  for (let i = -radius; i <= radius; i++) {
    const w = Math.exp(-(i * i) / (2 * sigma * sigma))
    taps[i + radius] = w
    sum += w
  }
  for (let i = 0; i < taps.length; i++) taps[i] /= sum
  return taps
}

/** Separable Gaussian blur with edge clamping; sigma = 0 is the identity. */
export function gaussianBlur(image: RgbImage, sigma: number): RgbImage {
  if (sigma <= 0) return image
  const taps = gaussianKernel(sigma)
  const radius = (taps.length - 1) / 2
  const { height, width } = image
  const clamp = (v: number, hi: number) => Math.min(Math.max(v, 0), hi)

  const horizontal = new Float64Array(image.data.length)
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      for (let c = 0; c < 3; c++) {
        let acc = 0
        for (let t = -radius; t <= radius; t++) {
          const xx = clamp(x + t, width - 1)
          acc += taps[t + radius] * image.data[3 * (y * width + xx) + c]
        }
        horizontal[3 * (y * width + x) + c] = acc
      }
    }
  }
  const out = new Float64Array(image.data.length)
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      for (let c = 0; c < 3; c++) {
        let acc = 0
        for (let t = -radius; t <= radius; t++) {
          const yy = clamp(y + t, height - 1)
          acc += taps[t + radius] * horizontal[3 * (yy * width + x) + c]
        }
        out[3 * (y * width + x) + c] = acc
      }
    }
  }
  return { height, width, data: out }
}

/** Bilinear resize, pixel-center aligned, borders clamped. */
export function resizeBilinear(image: RgbImage, height: number, width: number): RgbImage {
  const out = new Float64Array(height * width * 3)
  const { height: m, width: n } = image
  for (let i = 0; i < height; i++) {
    const sy = ((i + 0.5) * m) / height - 0.5
    const y0 = Math.min(Math.max(Math.floor(sy), 0), m - 1)
    const y1 = Math.min(y0 + 1, m - 1)
    const wy = Math.min(Math.max(sy - y0, 0), 1)
    for (let j = 0; j < width; j++) {
      const sx = ((j + 0.5) * n) / width - 0.5
      const x0 = Math.min(Math.max(Math.floor(sx), 0), n - 1)
      const x1 = Math.min(x0 + 1, n - 1)
      const wx = Math.min(Math.max(sx - x0, 0), 1)
      for (let c = 0; c < 3; c++) {
        const top =
          image.data[3 * (y0 * n + x0) + c] * (1 - wx) + image.data[3 * (y0 * n + x1) + c] * wx
        const bottom =
          image.data[3 * (y1 * n + x0) + c] * (1 - wx) + image.data[3 * (y1 * n + x1) + c] * wx
        out[3 * (i * width + j) + c] = top * (1 - wy) + bottom * wy
      }
    }
  }
  return { height, width, data: out }
}
