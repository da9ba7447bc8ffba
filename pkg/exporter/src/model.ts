/**
 * Classifier wrapper: pooling-layer capture and per-channel gradient weights.
 *
 * Two sources are supported: a tfjs layers model saved on disk (pass a
 * `model.json` path; a VGG-16 export is the intended case and its pool5
 * shape is guarded), or the built-in deterministic tiny CNN used for
 * format-conformance testing when no pretrained weights are reachable.
 */

import * as tf from '@tensorflow/tfjs'

export interface ModelSpec {
  modelId: string
  /** square input edge in pixels */
  inputSize: number
  /** per-channel mean subtracted after scaling to [0, 1] */
  mean: [number, number, number]
  /** names of the capturable pooling layers, shallow to deep */
  poolLayers: string[]
  labels: string[]
  model: tf.LayersModel
}

const VGG_POOL5 = { k: 512, m: 7, n: 7 }

/** SplitMix64 stream mapped to [0, 1), matching the engine's synthetic PRNG. */
export class SplitMix64 {
  private state: bigint
  private static readonly MASK = (1n << 64n) - 1n

  constructor(seed: number | bigint) {
    this.state = BigInt(seed) & SplitMix64.MASK
  }

  nextFloat(): number {
    this.state = (this.state + 0x9e3779b97f4a7c15n) & SplitMix64.MASK
    let z = this.state
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & SplitMix64.MASK
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & SplitMix64.MASK
    z = z ^ (z >> 31n)
    return Number(z >> 11n) * 2 ** -53
  }

  fill(n: number, lo = 0, hi = 1): Float32Array {
    const out = new Float32Array(n)
    for (let i = 0; i < n; i++) out[i] = lo + (hi - lo) * this.nextFloat()
    return out
  }
}

/**
 * Small conv/pool stack with seed-stable weights and a linear logit head.
 * Input 32x32x3, three pooling stages (16, 8, 4), 8 classes.
 */
export function buildTinyCnn(seed = 1234): ModelSpec {
  const rng = new SplitMix64(seed)
  const model = tf.sequential()
  model.add(
    tf.layers.conv2d({
      inputShape: [32, 32, 3],
      filters: 8,
      kernelSize: 3,
      padding: 'same',
      activation: 'relu',
      name: 'conv1',
    }),
  )
  model.add(tf.layers.maxPooling2d({ poolSize: 2, name: 'pool1' }))
  model.add(
    tf.layers.conv2d({
      filters: 12,
      kernelSize: 3,
      padding: 'same',
      activation: 'relu',
      name: 'conv2',
    }),
  )
  model.add(tf.layers.maxPooling2d({ poolSize: 2, name: 'pool2' }))
  model.add(
    tf.layers.conv2d({
      filters: 16,
      kernelSize: 3,
      padding: 'same',
      activation: 'relu',
      name: 'conv3',
    }),
  )
  model.add(tf.layers.maxPooling2d({ poolSize: 2, name: 'pool3' }))
  model.add(tf.layers.flatten({ name: 'flatten' }))
  model.add(tf.layers.dense({ units: 8, name: 'logits' }))

  for (const layer of model.layers) {
    const weights = layer.getWeights()
    if (weights.length === 0) continue
    layer.setWeights(
      weights.map(w => tf.tensor(rng.fill(w.size, -0.25, 0.25), w.shape)),
    )
  }
  return {
    modelId: 'tiny-cnn',
    inputSize: 32,
    mean: [0, 0, 0],
    poolLayers: ['pool1', 'pool2', 'pool3'],
    labels: Array.from({ length: 8 }, (_, i) => `class_${i}`),
    model,
  }
}

export async function loadSavedModel(
  modelJsonPath: string,
  options: { modelId: string; labels: string[]; mean?: [number, number, number] },
): Promise<ModelSpec> {
  const model = await tf.loadLayersModel(`file://${modelJsonPath}`)
  const inputShape = model.inputs[0].shape
  const inputSize = inputShape[1] as number
  const poolLayers = model.layers
    .filter(l => /pool/i.test(l.name))
    .map(l => l.name)
  const spec: ModelSpec = {
    modelId: options.modelId,
    inputSize,
    mean: options.mean ?? [0, 0, 0],
    poolLayers,
    labels: options.labels,
    model,
  }
  if (options.modelId === 'vgg16') guardVgg16(spec)
  return spec
}

/** Refuse a wrong model variant before anything is written. */
export function guardVgg16(spec: ModelSpec): void {
  const last = spec.poolLayers[spec.poolLayers.length - 1]
  const shape = layerOutputShape(spec, last)
  if (shape.k !== VGG_POOL5.k || shape.m !== VGG_POOL5.m || shape.n !== VGG_POOL5.n) {
    throw new Error(
      `unexpected activation shape for ${last}: ` +
        `${shape.k}x${shape.m}x${shape.n}, expected 512x7x7`,
    )
  }
  if (spec.labels.length !== 1000) {
    throw new Error(`vgg16 expects 1000 labels, got ${spec.labels.length}`)
  }
}

export function layerOutputShape(spec: ModelSpec, layerName: string) {
  const shape = spec.model.getLayer(layerName).outputShape as number[]
  // tfjs layers are channels-last: [batch, m, n, k]
  return { m: shape[1], n: shape[2], k: shape[3] }
}

export interface CaptureResult {
  logits: Float32Array
  predicted: number
  /** layer name -> channels-first (K, M, N) activation */
  activations: Map<string, { shape: [number, number, number]; data: Float32Array }>
  /** layer name -> per-channel gradient weights (length K) */
  gradcamWeights: Map<string, Float32Array>
}

/** Forward pass with pooling capture; optionally per-layer gradient weights. */
export function capture(
  spec: ModelSpec,
  input: tf.Tensor4D,
  withGradcam: boolean,
): CaptureResult {
  const logitsT = tf.tidy(() => spec.model.apply(input) as tf.Tensor2D)
  const logits = logitsT.dataSync() as Float32Array
  logitsT.dispose()
  let predicted = 0
  for (let i = 1; i < logits.length; i++) if (logits[i] > logits[predicted]) predicted = i

  const activations = new Map<string, { shape: [number, number, number]; data: Float32Array }>()
  const gradcamWeights = new Map<string, Float32Array>()

  for (const name of spec.poolLayers) {
    const layerIndex = spec.model.layers.findIndex(l => l.name === name)
    const head = (x: tf.Tensor) =>
      spec.model.layers.slice(0, layerIndex + 1).reduce((t, l) => l.apply(t) as tf.Tensor, x)
    const tail = (a: tf.Tensor) =>
      spec.model.layers.slice(layerIndex + 1).reduce((t, l) => l.apply(t) as tf.Tensor, a)

    const activation = tf.tidy(() => head(input))
    const [, m, n, k] = activation.shape as number[]
    const channelsFirst = tf.tidy(() =>
      (activation.squeeze([0]) as tf.Tensor3D).transpose([2, 0, 1]),
    )
    activations.set(name, {
      shape: [k, m, n],
      data: channelsFirst.dataSync() as Float32Array,
    })
    channelsFirst.dispose()

    if (withGradcam) {
      const weights = tf.tidy(() => {
        const gradFn = tf.grad((a: tf.Tensor) =>
          (tail(a) as tf.Tensor).flatten().gather([predicted]).sum(),
        )
        const grads = gradFn(activation)
        return grads.mean([0, 1, 2]) as tf.Tensor1D // spatial mean per channel
      })
      gradcamWeights.set(name, weights.dataSync() as Float32Array)
      weights.dispose()
    }
    activation.dispose()
  }
  return { logits, predicted, activations, gradcamWeights }
}
