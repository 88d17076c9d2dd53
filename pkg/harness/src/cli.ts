#!/usr/bin/env node
/**
 * Command-line entry point.
 *
 * Invocation contract (shared with the supervising process):
 *
 *   sandbox-harness <code-file> --metadata <path> --wall-ms N --memory-bytes N
 *
 * One program per invocation; invocations are independent and safe to run in
 * parallel. The program's stdout/stderr flow through unmodified, and exactly
 * one JSON metadata line {"exit_class", "duration_ms"} is written to the
 * metadata path — on failure paths too, as long as that path is known.
 *
 * Exit status reports on the *harness*, not the program: 0 when supervision
 * completed and metadata was written (whatever the classification), 1 when
 * the metadata record could not be written, 2 on usage errors.
 */

import {
  DEFAULT_INTERPRETER,
  HarnessOutcome,
  checkLimits,
  runWithLimits,
  writeMetadata,
} from "./harness";

const USAGE =
  "usage: sandbox-harness <code-file> --metadata <path> --wall-ms N --memory-bytes N [--interpreter <path>]";

interface CliArgs {
  codePath: string;
  metadataPath: string;
  wallMs: number;
  memoryBytes: number;
  interpreter: string;
}

class UsageError extends Error {}

function parseArgs(argv: string[]): CliArgs {
  let codePath: string | undefined;
  let metadataPath: string | undefined;
  let wallMs: number | undefined;
  let memoryBytes: number | undefined;
  let interpreter = DEFAULT_INTERPRETER;

  const takeValue = (flag: string, value: string | undefined): string => {
    if (value === undefined) {
      throw new UsageError(`${flag} needs a value`);
    }
    return value;
  };

  for (let i = 0; i < argv.length; i += 1) {
    const arg = argv[i];
    switch (arg) {
      case "--metadata":
        metadataPath = takeValue(arg, argv[++i]);
        break;
      case "--wall-ms":
        wallMs = Number(takeValue(arg, argv[++i]));
        break;
      case "--memory-bytes":
        memoryBytes = Number(takeValue(arg, argv[++i]));
        break;
      case "--interpreter":
        interpreter = takeValue(arg, argv[++i]);
        break;
      default:
        if (arg.startsWith("--")) {
          throw new UsageError(`unknown option ${arg}`);
        }
        if (codePath !== undefined) {
          throw new UsageError("expected exactly one code file");
        }
        codePath = arg;
    }
  }

  if (codePath === undefined) {
    throw new UsageError("missing code file");
  }
  if (metadataPath === undefined) {
    throw new UsageError("missing --metadata");
  }
  if (wallMs === undefined || memoryBytes === undefined) {
    throw new UsageError("missing --wall-ms or --memory-bytes");
  }
  checkLimits(wallMs, memoryBytes);
  return { codePath, metadataPath, wallMs, memoryBytes, interpreter };
}

async function main(): Promise<number> {
  let args: CliArgs;
  try {
    args = parseArgs(process.argv.slice(2));
  } catch (err) {
    // Bad limits with a usable metadata path still get a record, so the
    // supervisor never has to guess what happened to the invocation.
    const metadataPath = recoverMetadataPath(process.argv.slice(2));
    if (metadataPath !== undefined) {
      tryWriteMetadata(metadataPath, { exitClass: "harness_error", durationMs: 0 });
    }
    process.stderr.write(`${String(err instanceof Error ? err.message : err)}\n${USAGE}\n`);
    return 2;
  }

  let outcome: HarnessOutcome;
  try {
    outcome = await runWithLimits(args);
  } catch (err) {
    outcome = { exitClass: "harness_error", durationMs: 0 };
    process.stderr.write(`harness failure: ${String(err)}\n`);
  }

  if (!tryWriteMetadata(args.metadataPath, outcome)) {
    return 1;
  }
  return 0;
}

function recoverMetadataPath(argv: string[]): string | undefined {
  const at = argv.indexOf("--metadata");
  if (at >= 0 && at + 1 < argv.length) {
    return argv[at + 1];
  }
  return undefined;
}

function tryWriteMetadata(path: string, outcome: HarnessOutcome): boolean {
  try {
    writeMetadata(path, outcome);
    return true;
  } catch (err) {
    process.stderr.write(`cannot write metadata to ${path}: ${String(err)}\n`);
    return false;
  }
}

main().then(
  (code) => process.exit(code),
  (err) => {
    process.stderr.write(`${String(err)}\n`);
    process.exit(1);
  },
);
