import * as tf from '@tensorflow/tfjs'

const PROB_FLOOR = 1e-12

/**
 * Joint training loss for a multi-exit classifier: the weighted sum over
 * exits of the per-exit cross-entropy, where each exit's cross-entropy is
 * averaged over the label dimension, so with a one-hot target only the
 * true-class term survives:
 *
 *   loss = sum_n w_n * ( -(1/C) * ln p_n[trueLabel] )
 *
 * Probabilities are clamped at 1e-12 before the log.
 */
export function branchynetLoss(
  perExitSoftmax: number[][],
  trueLabel: number,
  weights: number[],
): number {
  if (perExitSoftmax.length === 0) {
    throw new Error('need at least one exit')
  }
  if (perExitSoftmax.length !== weights.length) {
    throw new Error(
      `got ${perExitSoftmax.length} exits but ${weights.length} weights`,
    )
  }
  const numClasses = perExitSoftmax[0].length
  if (trueLabel < 0 || trueLabel >= numClasses) {
    throw new Error(`label ${trueLabel} outside [0, ${numClasses})`)
  }
  let total = 0
  for (let n = 0; n < perExitSoftmax.length; n++) {
    const probs = perExitSoftmax[n]
    if (probs.length !== numClasses) {
      throw new Error(
        `exit ${n} has ${probs.length} classes, expected ${numClasses}`,
      )
    }
    const p = Math.max(probs[trueLabel], PROB_FLOOR)
    total += weights[n] * (-Math.log(p) / numClasses)
  }
  return total
}

/**
 * Batched tensor version used by the training loop. `outputs` are softmax
 * tensors of shape [batch, C], one per exit; returns a scalar.
 */
export function jointLossTensor(
  outputs: tf.Tensor[],
  oneHotLabels: tf.Tensor,
  weights: number[],
): tf.Scalar {
  return tf.tidy(() => {
    const numClasses = oneHotLabels.shape[1] as number
    let total = tf.scalar(0)
    for (let n = 0; n < outputs.length; n++) {
      const pTrue = outputs[n].mul(oneHotLabels).sum(1)
      const ce = pTrue
        .clipByValue(PROB_FLOOR, 1)
        .log()
        .neg()
        .div(numClasses)
        .mean() as tf.Scalar
      total = total.add(ce.mul(weights[n]))
    }
    return total as tf.Scalar
  })
}
