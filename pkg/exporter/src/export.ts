/** Bundle export pipeline: blur, preprocess, forward, capture, write. */

import { mkdirSync, writeFileSync } from 'fs'
import { join } from 'path'
import * as tf from '@tensorflow/tfjs'

import { encodeTensor } from './dvt.js'
import { RgbImage, gaussianBlur, resizeBilinear } from './image.js'
import { ModelSpec, capture, layerOutputShape } from './model.js'

export interface ExportConfig {
  image: RgbImage
  sourceImagePath: string
  outDir: string
  /** subset of spec.poolLayers; defaults to all of them */
  layers?: string[]
  /** non-negative, strictly increasing; 0 means no blur */
  blurSigmas?: number[]
  captureGradcam?: boolean
}

export interface LayerManifestEntry {
  name: string
  k: number
  m: number
  n: number
  gradcam_weights: boolean
}

function validateSigmas(sigmas: number[]): void {
  for (let i = 0; i < sigmas.length; i++) {
    if (sigmas[i] < 0) throw new Error(`blur sigma must be non-negative, got ${sigmas[i]}`)
    if (i > 0 && sigmas[i] <= sigmas[i - 1]) {
      throw new Error(`blur sigmas must be strictly increasing, got ${sigmas}`)
    }
  }
}

/** Scale to [0, 1], subtract the recorded channel means, NHWC float32. */
function preprocess(image: RgbImage, mean: [number, number, number]): tf.Tensor4D {
  const { height, width } = image
  const data = new Float32Array(height * width * 3)
  for (let p = 0; p < height * width; p++) {
    for (let c = 0; c < 3; c++) data[3 * p + c] = image.data[3 * p + c] / 255 - mean[c]
  }
  return tf.tensor4d(data, [1, height, width, 3])
}

export function exportBundles(spec: ModelSpec, config: ExportConfig): string[] {
  const layers = config.layers ?? spec.poolLayers
  for (const name of layers) {
    if (!spec.poolLayers.includes(name)) throw new Error(`unknown layer ${name}`)
  }
  const sigmas = config.blurSigmas?.length ? config.blurSigmas : [0]
  validateSigmas(sigmas)

  const written: string[] = []
  for (const sigma of sigmas) {
    const dir =
      sigmas.length === 1 && sigma === 0
        ? config.outDir
        : join(config.outDir, `sigma_${sigma}`)
    written.push(exportOne(spec, config, layers, sigma, dir))
  }
  return written
}

function exportOne(
  spec: ModelSpec,
  config: ExportConfig,
  layers: string[],
  sigma: number,
  dir: string,
): string {
  const blurred = gaussianBlur(config.image, sigma)
  const resized = resizeBilinear(blurred, spec.inputSize, spec.inputSize)
  const input = preprocess(resized, spec.mean)
  const result = capture(spec, input, Boolean(config.captureGradcam))
  input.dispose()

  for (const name of layers) {
    const expected = layerOutputShape(spec, name)
    const got = result.activations.get(name)!
    if (got.shape[0] !== expected.k || got.shape[1] !== expected.m || got.shape[2] !== expected.n) {
      throw new Error(
        `unexpected activation shape for ${name}: got ${got.shape}, ` +
          `expected ${expected.k}x${expected.m}x${expected.n}`,
      )
    }
  }

  mkdirSync(dir, { recursive: true })

  // image.dvt holds the resized (and blurred) frame in [0, 1], pre mean-subtraction
  const unitImage = new Float32Array(resized.data.length)
  for (let i = 0; i < resized.data.length; i++) unitImage[i] = resized.data[i] / 255
  writeFileSync(
    join(dir, 'image.dvt'),
    encodeTensor([spec.inputSize, spec.inputSize, 3], unitImage),
  )
  writeFileSync(join(dir, 'logits.dvt'), encodeTensor([result.logits.length], result.logits))
  writeFileSync(join(dir, 'labels.txt'), spec.labels.join('\n') + '\n')

  const layerEntries: LayerManifestEntry[] = []
  for (const name of layers) {
    const act = result.activations.get(name)!
    writeFileSync(join(dir, `${name}.dvt`), encodeTensor(act.shape, act.data))
    const hasWeights = result.gradcamWeights.has(name)
    if (hasWeights) {
      const w = result.gradcamWeights.get(name)!
      writeFileSync(join(dir, `${name}.gradw.dvt`), encodeTensor([w.length], w))
    }
    layerEntries.push({
      name,
      k: act.shape[0],
      m: act.shape[1],
      n: act.shape[2],
      gradcam_weights: hasWeights,
    })
  }

  const manifest = {
    model_id: spec.modelId,
    preprocessing: { resize: [spec.inputSize, spec.inputSize], mean: spec.mean },
    source_image: config.sourceImagePath,
    blur_sigma: sigma > 0 ? sigma : null,
    predicted_class: result.predicted,
    layers: layerEntries,
  }
  writeFileSync(join(dir, 'manifest.json'), JSON.stringify(manifest, null, 2) + '\n')
  return dir
}
