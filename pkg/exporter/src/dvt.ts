/**
 * DVT tensor file codec, the bit-exact interchange format with the engine.
 *
 * Layout (little-endian): magic "DVET" | version u8 = 1 | ndim u8 in 1..4 |
 * ndim x extent u32 | payload f32, row-major.
 */

const MAGIC = 'DVET'
const VERSION = 1
const MAX_NDIM = 4

export function encodeTensor(shape: number[], data: Float32Array): Buffer {
  if (shape.length < 1 || shape.length > MAX_NDIM) {
    throw new Error(`tensor must have 1..${MAX_NDIM} dims, got ${shape.length}`)
  }
  const count = shape.reduce((a, b) => a * b, 1)
  if (shape.some(e => e <= 0 || !Number.isInteger(e))) {
    throw new Error(`bad extents ${shape}`)
  }
  if (data.length !== count) {
    throw new Error(`payload length ${data.length} != product of extents ${count}`)
  }
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i])) {
      throw new Error(`non-finite value at flat index ${i}`)
    }
  }
  const buf = Buffer.alloc(6 + 4 * shape.length + 4 * count)
  buf.write(MAGIC, 0, 'ascii')
  buf.writeUInt8(VERSION, 4)
  buf.writeUInt8(shape.length, 5)
  shape.forEach((e, i) => buf.writeUInt32LE(e, 6 + 4 * i))
  const payloadOffset = 6 + 4 * shape.length
  for (let i = 0; i < count; i++) {
    buf.writeFloatLE(data[i], payloadOffset + 4 * i)
  }
  return buf
}

export interface DecodedTensor {
  shape: number[]
  data: Float32Array
}

export function decodeTensor(buf: Buffer): DecodedTensor {
  if (buf.length < 6 || buf.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error('not a DVT file')
  }
  const version = buf.readUInt8(4)
  if (version !== VERSION) throw new Error(`unsupported version ${version}`)
  const ndim = buf.readUInt8(5)
  if (ndim < 1 || ndim > MAX_NDIM) throw new Error(`bad dimension count ${ndim}`)
  if (buf.length < 6 + 4 * ndim) throw new Error('truncated')
  const shape: number[] = []
  for (let i = 0; i < ndim; i++) shape.push(buf.readUInt32LE(6 + 4 * i))
  const count = shape.reduce((a, b) => a * b, 1)
  const payloadOffset = 6 + 4 * ndim
  if (buf.length < payloadOffset + 4 * count) throw new Error('truncated')
  const data = new Float32Array(count)
  for (let i = 0; i < count; i++) {
    data[i] = buf.readFloatLE(payloadOffset + 4 * i)
    if (!Number.isFinite(data[i])) throw new Error('corrupt values')
  }
  return { shape, data }
}
