#!/usr/bin/env node
/**
 * icsq-export: turn annotated videos into embedding-sequence files that the
 * tseg trainer consumes directly.
 *
 *   icsq-export export --annotations a.json --video-dir vids/ --out corpus/
 *   icsq-export validate --dir corpus/
 */

import { parseArgs } from 'node:util';

import { AnnotationError, parseAnnotations } from './annotations.js';
import { EncoderError, listEncoders } from './encoder.js';
import { ExportError, exportCorpus } from './export.js';
import { FormatError } from './icsq.js';
import { validateExportDir } from './validate.js';
import { VideoError } from './y4m.js';

const USAGE = `usage: icsq-export <command> [options]

commands:
  export    encode videos listed in an annotation file into .icsq sequences
  validate  decode an exported directory and report integrity problems

export options:
  --annotations <path>  annotation JSON (required)
  --video-dir <path>    directory holding <id>.y4m per record (required)
  --out <path>          output directory (required)
  --encoder <id>        frame encoder (default pooled-projection-512)
  --batch-size <n>      frames per encoder call (default 16)
  --augment             apply seeded pixel jitter before encoding
  --augment-seed <n>    jitter seed (default 0)
  --list-encoders       print registered encoder ids and exit

validate options:
  --dir <path>          exported directory to check (required)
  --json                machine-readable report
`;

function fail(message: string): never {
  process.stderr.write(`error: ${message}\n`);
  process.exit(1);
}

function requireOpt(value: string | undefined, name: string): string {
  if (value === undefined) {
    fail(`missing required option --${name}`);
  }
  return value;
}

function cmdExport(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      annotations: { type: 'string' },
      'video-dir': { type: 'string' },
      out: { type: 'string' },
      encoder: { type: 'string' },
      'batch-size': { type: 'string' },
      augment: { type: 'boolean', default: false },
      'augment-seed': { type: 'string' },
      'list-encoders': { type: 'boolean', default: false },
    },
  });
  if (values['list-encoders']) {
    for (const id of listEncoders()) {
      process.stdout.write(`${id}\n`);
    }
    return 0;
  }
  const records = parseAnnotations(requireOpt(values.annotations, 'annotations'));
  const { manifestPath, results } = exportCorpus(
    records,
    requireOpt(values['video-dir'], 'video-dir'),
    {
      outDir: requireOpt(values.out, 'out'),
      encoder: values.encoder,
      batchSize: values['batch-size'] ? Number(values['batch-size']) : undefined,
      augment: values.augment,
      augmentSeed: values['augment-seed'] ? Number(values['augment-seed']) : undefined,
    },
  );
  for (const r of results) {
    process.stdout.write(
      `${r.id}\t${r.t} frames\tdim ${r.dim}\t${r.labeled ? 'labeled' : 'unlabeled'}\n`,
    );
  }
  process.stdout.write(`wrote ${results.length} sequences, manifest at ${manifestPath}\n`);
  return 0;
}

function cmdValidate(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      dir: { type: 'string' },
      json: { type: 'boolean', default: false },
    },
  });
  const report = validateExportDir(requireOpt(values.dir, 'dir'));
  if (values.json) {
    process.stdout.write(JSON.stringify(report, null, 2) + '\n');
  } else {
    for (const issue of report.issues) {
      process.stdout.write(`${issue.file}: ${issue.problem}\n`);
    }
    process.stdout.write(
      `checked ${report.checked} files, ` +
        `norms [${report.normMin.toFixed(4)}, ${report.normMax.toFixed(4)}]: ` +
        `${report.ok ? 'OK' : 'FAILED'}\n`,
    );
  }
  return report.ok ? 0 : 1;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    switch (command) {
      case 'export':
        return cmdExport(rest);
      case 'validate':
        return cmdValidate(rest);
      case undefined:
      case '--help':
      case '-h':
        process.stdout.write(USAGE);
        return command === undefined ? 2 : 0;
      default:
        process.stderr.write(`error: unknown command '${command}'\n${USAGE}`);
        return 2;
    }
  } catch (err) {
    const code = (err as NodeJS.ErrnoException).code ?? '';
    if (
      err instanceof AnnotationError ||
      err instanceof EncoderError ||
      err instanceof ExportError ||
      err instanceof FormatError ||
      err instanceof VideoError ||
      code === 'ENOENT' ||
      code.startsWith('ERR_PARSE_ARGS')
    ) {
      fail((err as Error).message);
    }
    throw err;
  }
}

process.exit(main(process.argv.slice(2)));
