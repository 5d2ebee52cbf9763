import * as tf from '@tensorflow/tfjs'
import { describe, expect, it } from 'vitest'
import { branchynetLoss, jointLossTensor } from '../src/loss.js'
import { mulberry32 } from '../src/rng.js'

function randomSoftmax(uniform: () => number, numClasses: number): number[] {
  const raw = Array.from({ length: numClasses }, () => uniform() + 1e-3)
  const sum = raw.reduce((a, b) => a + b, 0)
  return raw.map(v => v / sum)
}

describe('branchynetLoss', () => {
  it('is zero for a certain single exit', () => {
    const loss = branchynetLoss([[1.0, 0.0, 0.0]], 0, [1.0])
    expect(Math.abs(loss)).toBeLessThan(1e-9)
  })

  it('matches the uniform ten-class value', () => {
    const uniform = Array.from({ length: 10 }, () => 0.1)
    const loss = branchynetLoss([uniform], 3, [1.0])
    // -(1/10) * ln(1/10)
    expect(Math.abs(loss - 0.23025850929940458)).toBeLessThan(1e-9)
  })

  it('matches the weighted two-exit value', () => {
    const exit0 = [0.5, ...Array.from({ length: 9 }, () => 0.5 / 9)]
    const exit1 = [0.8, ...Array.from({ length: 9 }, () => 0.2 / 9)]
    const loss = branchynetLoss([exit0, exit1], 0, [1.0, 2.0])
    // (1/10) * (ln 2 + 2 * ln 1.25)
    expect(Math.abs(loss - 0.11394342831883648)).toBeLessThan(1e-9)
  })

  it('is non-negative on random inputs', () => {
    const uniform = mulberry32(5)
    for (let i = 0; i < 200; i++) {
      const numClasses = 2 + Math.floor(uniform() * 8)
      const exits = [randomSoftmax(uniform, numClasses), randomSoftmax(uniform, numClasses)]
      const label = Math.floor(uniform() * numClasses)
      expect(branchynetLoss(exits, label, [1.0, 1.0])).toBeGreaterThanOrEqual(0)
    }
  })

  it('is zero only when every exit is certain of the truth', () => {
    const certain = [1.0, 0.0]
    const unsure = [0.9, 0.1]
    expect(branchynetLoss([certain, certain], 0, [1, 1])).toBe(0)
    expect(branchynetLoss([certain, unsure], 0, [1, 1])).toBeGreaterThan(0)
  })

  it('is linear in the weights', () => {
    const exits = [
      [0.6, 0.3, 0.1],
      [0.2, 0.7, 0.1],
    ]
    const base = branchynetLoss(exits, 1, [1.0, 3.0])
    const doubled = branchynetLoss(exits, 1, [2.0, 6.0])
    expect(Math.abs(doubled - 2 * base)).toBeLessThan(1e-12)
  })

  it('clamps vanishing probabilities instead of overflowing', () => {
    const loss = branchynetLoss([[0.0, 1.0]], 0, [1.0])
    expect(Number.isFinite(loss)).toBe(true)
    expect(loss).toBeCloseTo(-Math.log(1e-12) / 2, 9)
  })

  it('rejects mismatched shapes', () => {
    expect(() => branchynetLoss([[0.5, 0.5]], 0, [1, 1])).toThrow(/weights/)
    expect(() => branchynetLoss([[0.5, 0.5], [0.3, 0.3, 0.4]], 0, [1, 1])).toThrow(/classes/)
    expect(() => branchynetLoss([[0.5, 0.5]], 2, [1])).toThrow(/label/)
    expect(() => branchynetLoss([], 0, [])).toThrow(/exit/)
  })

  it('agrees with the batched tensor version', () => {
    const uniform = mulberry32(11)
    const numClasses = 5
    const batch = 16
    const exits0: number[][] = []
    const exits1: number[][] = []
    const labels: number[] = []
    for (let i = 0; i < batch; i++) {
      exits0.push(randomSoftmax(uniform, numClasses))
      exits1.push(randomSoftmax(uniform, numClasses))
      labels.push(Math.floor(uniform() * numClasses))
    }
    const weights = [1.0, 2.5]
    const tensorLoss = tf.tidy(() =>
      jointLossTensor(
        [tf.tensor2d(exits0), tf.tensor2d(exits1)],
        tf.oneHot(tf.tensor1d(labels, 'int32'), numClasses),
        weights,
      ).dataSync()[0],
    )
    let scalarMean = 0
    for (let i = 0; i < batch; i++) {
      scalarMean += branchynetLoss([exits0[i], exits1[i]], labels[i], weights) / batch
    }
    expect(Math.abs(tensorLoss - scalarMean)).toBeLessThan(1e-6)
  })
})
