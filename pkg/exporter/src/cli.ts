import { readFileSync } from 'node:fs'
import { DEFAULT_CONFIG, ExportConfig, exportTraceFile } from './pipeline.js'

function usage(): never {
  console.error('usage: node dist/cli.js --out TRACE.jsonl [--config CONFIG.json] [--seed N]')
  process.exit(2)
}

function main(argv: string[]): void {
  let out: string | null = null
  let configPath: string | null = null
  let seed: number | null = null
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case '--out':
        out = argv[++i]
        break
      case '--config':
        configPath = argv[++i]
        break
      case '--seed':
        seed = Number(argv[++i])
        break
      case '--help':
        usage()
        break
      default:
        console.error(`unknown argument: ${argv[i]}`)
        usage()
    }
  }
  if (!out) usage()

  let config: ExportConfig = { ...DEFAULT_CONFIG }
  if (configPath) {
    config = { ...config, ...JSON.parse(readFileSync(configPath, 'utf-8')) }
  }
  if (seed !== null) {
    config = { ...config, seed }
  }
  const summary = exportTraceFile(config, out)
  console.log(JSON.stringify(summary, null, 2))
}

main(process.argv.slice(2))
