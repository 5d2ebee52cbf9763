import { gaussian, mulberry32 } from './rng.js'

export interface Dataset {
  xs: number[][]
  labels: number[]
}

/**
 * Gaussian blobs, one per class, centered on a circle. `sigma` relative to
 * the center spacing controls how hard the classification problem is.
 */
export function makeBlobs(
  numSamples: number,
  numClasses: number,
  radius: number,
  sigma: number,
  seed: number,
): Dataset {
  const uniform = mulberry32(seed)
  const normal = gaussian(uniform)
  const xs: number[][] = []
  const labels: number[] = []
  for (let i = 0; i < numSamples; i++) {
    const label = Math.floor(uniform() * numClasses)
    const angle = (2 * Math.PI * label) / numClasses
    xs.push([
      radius * Math.cos(angle) + sigma * normal(),
      radius * Math.sin(angle) + sigma * normal(),
    ])
    labels.push(label)
  }
  return { xs, labels }
}

/**
 * Interleaved spiral arms, one per class, plus an ambiguous core: a central
 * disk where every class is equally likely. Arm points are easy (confident,
 * usually correct); core points are irreducibly hard, the "complex" samples
 * an offload decider should learn to flag by their low confidence.
 */
export function makeSpirals(
  numSamples: number,
  numClasses: number,
  turns: number,
  noise: number,
  seed: number,
  ambiguousFraction = 0.15,
): Dataset {
  const uniform = mulberry32(seed)
  const normal = gaussian(uniform)
  const xs: number[][] = []
  const labels: number[] = []
  for (let i = 0; i < numSamples; i++) {
    const label = Math.floor(uniform() * numClasses)
    if (uniform() < ambiguousFraction) {
      const r = 0.35 * Math.sqrt(uniform())
      const phi = 2 * Math.PI * uniform()
      xs.push([r * Math.cos(phi), r * Math.sin(phi)])
    } else {
      const t = uniform()
      const radius = 0.5 + 0.8 * t
      const angle = 2 * Math.PI * (label / numClasses + turns * t)
      xs.push([
        radius * Math.cos(angle) + noise * normal(),
        radius * Math.sin(angle) + noise * normal(),
      ])
    }
    labels.push(label)
  }
  return { xs, labels }
}

/** Head/tail split preserving order (deterministic). */
export function splitDataset(data: Dataset, firstCount: number): [Dataset, Dataset] {
  return [
    { xs: data.xs.slice(0, firstCount), labels: data.labels.slice(0, firstCount) },
    { xs: data.xs.slice(firstCount), labels: data.labels.slice(firstCount) },
  ]
}
