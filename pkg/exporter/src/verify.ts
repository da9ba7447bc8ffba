/**
 * Standalone bundle check, independent of the explanation engine: re-reads
 * every file and re-derives the invariants (shapes vs manifest, finiteness,
 * argmax consistency, label count, weight lengths).
 */

import { existsSync, readFileSync } from 'fs'
import { join } from 'path'

import { decodeTensor } from './dvt.js'

export interface VerifyReport {
  pass: boolean
  failures: string[]
}

export function verifyBundle(dir: string): VerifyReport {
  const failures: string[] = []
  const fail = (msg: string) => failures.push(msg)

  const manifestPath = join(dir, 'manifest.json')
  if (!existsSync(manifestPath)) {
    return { pass: false, failures: ['missing manifest.json'] }
  }
  let manifest: any
  try {
    manifest = JSON.parse(readFileSync(manifestPath, 'utf8'))
  } catch (e) {
    return { pass: false, failures: [`manifest.json unparseable: ${e}`] }
  }

  const readDvt = (name: string) => {
    const path = join(dir, name)
    if (!existsSync(path)) {
      fail(`missing ${name}`)
      return null
    }
    try {
      return decodeTensor(readFileSync(path))
    } catch (e) {
      fail(`${name}: ${(e as Error).message}`)
      return null
    }
  }

  const image = readDvt('image.dvt')
  if (image && (image.shape.length !== 3 || image.shape[2] !== 3)) {
    fail(`image.dvt: expected H x W x 3, got ${image.shape}`)
  }

  const logits = readDvt('logits.dvt')
  if (logits) {
    if (logits.shape.length !== 1) fail(`logits.dvt: expected 1-d, got ${logits.shape}`)
    let argmax = 0
    for (let i = 1; i < logits.data.length; i++) {
      if (logits.data[i] > logits.data[argmax]) argmax = i
    }
    if (argmax !== manifest.predicted_class) {
      fail(
        `inconsistent bundle: argmax(logits)=${argmax} but manifest says ${manifest.predicted_class}`,
      )
    }
  }

  const labelsPath = join(dir, 'labels.txt')
  if (!existsSync(labelsPath)) {
    fail('missing labels.txt')
  } else if (logits) {
    const labels = readFileSync(labelsPath, 'utf8').split('\n').filter(l => l.length > 0)
    if (labels.length !== logits.data.length) {
      fail(`labels.txt has ${labels.length} entries but ${logits.data.length} logits`)
    }
  }

  if (!Array.isArray(manifest.layers) || manifest.layers.length === 0) {
    fail('manifest lists no layers')
  } else {
    for (const entry of manifest.layers) {
      const maps = readDvt(`${entry.name}.dvt`)
      if (maps) {
        const want = [entry.k, entry.m, entry.n]
        if (maps.shape.length !== 3 || maps.shape.some((e, i) => e !== want[i])) {
          fail(`${entry.name}.dvt: shape ${maps.shape} != manifest ${want}`)
        }
      }
      if (entry.gradcam_weights) {
        const w = readDvt(`${entry.name}.gradw.dvt`)
        if (w && (w.shape.length !== 1 || w.shape[0] !== entry.k)) {
          fail(`${entry.name}.gradw.dvt: shape ${w.shape} != (${entry.k})`)
        }
      }
    }
  }

  return { pass: failures.length === 0, failures }
}
