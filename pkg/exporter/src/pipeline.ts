import { makeSpirals, splitDataset } from './data.js'
import {
  accuracyOf,
  argmax,
  buildEeModel,
  buildServerModel,
  predictExits,
  trainEeModel,
} from './model.js'
import { TraceRecord, buildRecords, writeTrace } from './export.js'

export interface ExportConfig {
  samples: number
  classes: number
  hiddenUnits: number[]
  serverHiddenUnits: number[]
  exitWeights: number[]
  epochs: number
  serverEpochs: number
  learningRate: number
  spiralTurns: number
  spiralNoise: number
  /** share of samples landing in the ambiguous core (hard for any model) */
  ambiguousFraction: number
  /** share of samples used to fit the models; the rest become the trace */
  trainFraction: number
  seed: number
}

export const DEFAULT_CONFIG: ExportConfig = {
  samples: 3200,
  classes: 4,
  hiddenUnits: [12, 12],
  serverHiddenUnits: [32, 32],
  exitWeights: [1.0, 1.0],
  epochs: 300,
  serverEpochs: 400,
  learningRate: 0.08,
  spiralTurns: 0.8,
  spiralNoise: 0.08,
  ambiguousFraction: 0.15,
  trainFraction: 0.5,
  seed: 7,
}

export interface ExportSummary {
  samples: number
  classes: number
  exits: number
  exitAccuracies: number[]
  serverAccuracy: number
  finalLoss: number
}

export interface ExportResult {
  records: TraceRecord[]
  summary: ExportSummary
}

/**
 * Train the toy early-exit model and the larger stand-in server model on one
 * half of a spirals dataset, then dump per-exit softmax vectors and server
 * predictions for the other half, so the exported confidences are honest
 * out-of-sample values. Fully deterministic for a given config.
 */
export function runExport(config: ExportConfig): ExportResult {
  const data = makeSpirals(
    config.samples,
    config.classes,
    config.spiralTurns,
    config.spiralNoise,
    config.seed,
    config.ambiguousFraction,
  )
  const trainCount = Math.floor(config.samples * config.trainFraction)
  const [trainSet, exportSet] = splitDataset(data, trainCount)
  if (exportSet.labels.length === 0) {
    throw new Error('trainFraction leaves nothing to export')
  }

  const eeModel = buildEeModel({
    inputDim: 2,
    numClasses: config.classes,
    hiddenUnits: config.hiddenUnits,
    seed: config.seed,
  })
  const history = trainEeModel(eeModel, trainSet.xs, trainSet.labels, {
    exitWeights: config.exitWeights,
    epochs: config.epochs,
    learningRate: config.learningRate,
  })

  const serverModel = buildServerModel({
    inputDim: 2,
    numClasses: config.classes,
    hiddenUnits: config.serverHiddenUnits,
    seed: config.seed + 1000,
  })
  trainEeModel(serverModel, trainSet.xs, trainSet.labels, {
    exitWeights: [1.0],
    epochs: config.serverEpochs,
    learningRate: config.learningRate,
  })

  const perExit = predictExits(eeModel, exportSet.xs)
  const serverOut = predictExits(serverModel, exportSet.xs)[0]
  const serverLabels = serverOut.map(argmax)
  const records = buildRecords(perExit, exportSet.labels, serverLabels)
  const summary: ExportSummary = {
    samples: exportSet.labels.length,
    classes: config.classes,
    exits: perExit.length,
    exitAccuracies: perExit.map(mat => accuracyOf(mat, exportSet.labels)),
    serverAccuracy: accuracyOf(serverOut, exportSet.labels),
    finalLoss: history[history.length - 1],
  }
  return { records, summary }
}

export function exportTraceFile(config: ExportConfig, outPath: string): ExportSummary {
  const { records, summary } = runExport(config)
  writeTrace(outPath, config.classes, summary.exits, records, {
    dataset: 'gaussian-blobs',
    model: 'toy-ee-mlp',
    seed: config.seed,
    server_accuracy: summary.serverAccuracy,
  })
  return summary
}
