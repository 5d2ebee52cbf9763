import { writeFileSync } from 'node:fs'

export interface TraceRecord {
  id: number
  label: number
  exits: number[][]
  server_label: number
}

export interface TraceMeta {
  [key: string]: unknown
}

/**
 * Serialize records into the trace interchange format: a JSON Lines file
 * whose header carries (classes, exits, meta) followed by one record per
 * line, LF endings, exits ordered shallow to deep with the final layer last.
 */
export function traceToJsonl(
  numClasses: number,
  numExits: number,
  records: TraceRecord[],
  meta: TraceMeta = {},
): string {
  const lines: string[] = [
    JSON.stringify({ classes: numClasses, exits: numExits, meta }),
  ]
  for (const rec of records) {
    lines.push(
      JSON.stringify({
        id: rec.id,
        label: rec.label,
        exits: rec.exits,
        server_label: rec.server_label,
      }),
    )
  }
  return lines.join('\n') + '\n'
}

export function writeTrace(
  path: string,
  numClasses: number,
  numExits: number,
  records: TraceRecord[],
  meta: TraceMeta = {},
): void {
  writeFileSync(path, traceToJsonl(numClasses, numExits, records, meta), 'utf-8')
}

/**
 * Assemble records from per-exit softmax matrices plus the server model's
 * predictions. Shapes must agree; softmax vectors are emitted as produced by
 * the model (float32), which keeps them on the simplex within 1e-6.
 */
export function buildRecords(
  perExitSoftmax: number[][][],
  labels: number[],
  serverLabels: number[],
): TraceRecord[] {
  const n = labels.length
  for (const [e, mat] of perExitSoftmax.entries()) {
    if (mat.length !== n) {
      throw new Error(`exit ${e} has ${mat.length} rows, expected ${n}`)
    }
  }
  if (serverLabels.length !== n) {
    throw new Error(`server labels: ${serverLabels.length} rows, expected ${n}`)
  }
  const records: TraceRecord[] = []
  for (let i = 0; i < n; i++) {
    records.push({
      id: i,
      label: labels[i],
      exits: perExitSoftmax.map(mat => mat[i]),
      server_label: serverLabels[i],
    })
  }
  return records
}
