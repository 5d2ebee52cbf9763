import * as tf from '@tensorflow/tfjs'
import { jointLossTensor } from './loss.js'

export interface EeModelSpec {
  inputDim: number
  numClasses: number
  /** trunk layer widths; the early exit hangs off the first trunk layer */
  hiddenUnits: number[]
  seed: number
}

/**
 * Toy early-exit classifier: a dense trunk with a softmax branch after the
 * first hidden layer and the final softmax at the end. Outputs are ordered
 * shallow to deep, final layer last.
 */
export function buildEeModel(spec: EeModelSpec): tf.LayersModel {
  const input = tf.input({ shape: [spec.inputDim] })
  let seed = spec.seed
  const dense = (units: number, activation: 'relu' | 'softmax', name: string) =>
    tf.layers.dense({
      units,
      activation,
      name,
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed++ }),
      biasInitializer: 'zeros',
    })

  let trunk = dense(spec.hiddenUnits[0], 'relu', 'trunk_0').apply(input) as tf.SymbolicTensor
  const exit0 = dense(spec.numClasses, 'softmax', 'exit_0').apply(trunk) as tf.SymbolicTensor
  for (let i = 1; i < spec.hiddenUnits.length; i++) {
    trunk = dense(spec.hiddenUnits[i], 'relu', `trunk_${i}`).apply(trunk) as tf.SymbolicTensor
  }
  const final = dense(spec.numClasses, 'softmax', 'exit_final').apply(trunk) as tf.SymbolicTensor
  return tf.model({ inputs: input, outputs: [exit0, final] })
}

/** Single-output classifier standing in for the remote model. */
export function buildServerModel(spec: EeModelSpec): tf.LayersModel {
  const input = tf.input({ shape: [spec.inputDim] })
  let seed = spec.seed
  let h: tf.SymbolicTensor = input
  for (let i = 0; i < spec.hiddenUnits.length; i++) {
    h = tf.layers
      .dense({
        units: spec.hiddenUnits[i],
        activation: 'relu',
        kernelInitializer: tf.initializers.glorotUniform({ seed: seed++ }),
        biasInitializer: 'zeros',
      })
      .apply(h) as tf.SymbolicTensor
  }
  const out = tf.layers
    .dense({
      units: spec.numClasses,
      activation: 'softmax',
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed++ }),
      biasInitializer: 'zeros',
    })
    .apply(h) as tf.SymbolicTensor
  return tf.model({ inputs: input, outputs: out })
}

export interface TrainOptions {
  exitWeights: number[]
  epochs: number
  learningRate: number
}

/** Full-batch training with the joint multi-exit loss; returns loss history. */
export function trainEeModel(
  model: tf.LayersModel,
  xs: number[][],
  labels: number[],
  opts: TrainOptions,
): number[] {
  const numClasses = (model.outputs[0].shape[1] ?? 0) as number
  const x = tf.tensor2d(xs)
  const y = tf.oneHot(tf.tensor1d(labels, 'int32'), numClasses)
  const optimizer = tf.train.adam(opts.learningRate)
  // LayerVariable hides the backing tf.Variable behind a protected field;
  // minimize() needs the variables themselves, so reach through.
  const varList = model.trainableWeights.map(
    w => (w as unknown as { val: tf.Variable }).val,
  )
  const history: number[] = []
  for (let epoch = 0; epoch < opts.epochs; epoch++) {
    const cost = optimizer.minimize(
      () => {
        const raw = model.apply(x, { training: true })
        const outputs = Array.isArray(raw) ? raw : [raw]
        return jointLossTensor(outputs as tf.Tensor[], y, opts.exitWeights)
      },
      true,
      varList,
    )
    if (cost) {
      history.push(cost.dataSync()[0])
      cost.dispose()
    }
  }
  x.dispose()
  y.dispose()
  optimizer.dispose()
  return history
}

/** Per-exit softmax matrices for a dataset, shallow to deep. */
export function predictExits(model: tf.LayersModel, xs: number[][]): number[][][] {
  return tf.tidy(() => {
    const raw = model.predict(tf.tensor2d(xs))
    const outputs = Array.isArray(raw) ? raw : [raw]
    return outputs.map(t => t.arraySync() as number[][])
  })
}

export function argmax(vec: number[]): number {
  let best = 0
  for (let i = 1; i < vec.length; i++) {
    if (vec[i] > vec[best]) best = i
  }
  return best
}

export function accuracyOf(softmax: number[][], labels: number[]): number {
  let hits = 0
  for (let i = 0; i < labels.length; i++) {
    if (argmax(softmax[i]) === labels[i]) hits++
  }
  return hits / labels.length
}
