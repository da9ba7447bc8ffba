import { describe, expect, it } from 'vitest'

import { RgbImage, gaussianBlur, gaussianKernel, resizeBilinear } from '../src/image.js'

function constantImage(h: number, w: number, value: number): RgbImage {
  return { height: h, width: w, data: new Float64Array(h * w * 3).fill(value) }
}

describe('gaussian blur', () => {
  it('kernel is normalized and truncated at ceil(3 sigma)', () => {
    const taps = gaussianKernel(1.5)
    expect(taps.length).toBe(2 * Math.ceil(4.5) + 1)
    const sum = taps.reduce((a, b) => a + b, 0)
    expect(sum).toBeCloseTo(1, 12)
  })

  it('sigma 0 is the identity', () => {
    const img = constantImage(4, 4, 100)
    expect(gaussianBlur(img, 0)).toBe(img)
  })

  it('preserves constant images', () => {
    const out = gaussianBlur(constantImage(8, 8, 50), 2)
    for (const v of out.data) expect(v).toBeCloseTo(50, 9)
  })

  it('reduces variance of a checker pattern', () => {
    const img = constantImage(8, 8, 0)
    for (let p = 0; p < 64; p++) {
      const v = (Math.floor(p / 8) + p) % 2 === 0 ? 255 : 0
      img.data[3 * p] = img.data[3 * p + 1] = img.data[3 * p + 2] = v
    }
    const out = gaussianBlur(img, 1)
    const spread = (d: Float64Array) => Math.max(...d) - Math.min(...d)
    expect(spread(out.data)).toBeLessThan(spread(img.data))
  })
})

describe('bilinear resize', () => {
  it('same size is the identity', () => {
    const img = constantImage(3, 5, 0)
    for (let i = 0; i < img.data.length; i++) img.data[i] = i
    const out = resizeBilinear(img, 3, 5)
    expect(Array.from(out.data)).toEqual(Array.from(img.data))
  })

  it('matches the pixel-center checkerboard reference', () => {
    // 2x2 [[0,255],[255,0]] -> 4x4, frozen from the engine's bilinear tests
    const img: RgbImage = { height: 2, width: 2, data: new Float64Array(12) }
    img.data.set([0, 0, 0, 255, 255, 255], 0)
    img.data.set([255, 255, 255, 0, 0, 0], 6)
    const out = resizeBilinear(img, 4, 4)
    const red = [...Array(16)].map((_, p) => out.data[3 * p])
    expect(red).toEqual([
      0, 63.75, 191.25, 255,
      63.75, 95.625, 159.375, 191.25,
      191.25, 159.375, 95.625, 63.75,
      255, 191.25, 63.75, 0,
    ])
  })
})
