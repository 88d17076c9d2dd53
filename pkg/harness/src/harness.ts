/**
 * Supervised execution of a single untrusted program.
 *
 * The harness runs one code file per invocation under two limits:
 *
 *  - a memory ceiling, applied *inside* the interpreter via RLIMIT_AS so an
 *    over-allocating program fails with MemoryError instead of stalling the
 *    host, and
 *  - a wall-clock ceiling, enforced from out here with a hard SIGKILL so even
 *    a program that never yields is stopped.
 *
 * Program stdout/stderr are inherited, not piped: the child writes straight to
 * whatever descriptors the caller gave us, so output reaches the supervising
 * process byte-for-byte. The harness never reads, rewrites, or truncates it;
 * any capture cap is the caller's concern. All structured reporting goes to a
 * dedicated metadata file instead (see cli.ts), which keeps the output channel
 * clean for the program itself.
 */

import { spawn } from "node:child_process";
import * as fs from "node:fs";

/** Classification of how the supervised program finished. */
export type ExitClass =
  | "ok"
  | "timeout"
  | "memory_kill"
  | "nonzero_exit"
  | "harness_error";

export interface HarnessConfig {
  /** Path of the program to run. Missing file classifies as harness_error. */
  codePath: string;
  /** Where the one-line JSON metadata record is written. */
  metadataPath: string;
  /** Wall-clock ceiling in milliseconds; must be > 0. */
  wallMs: number;
  /** Address-space ceiling in bytes; must be > 0. */
  memoryBytes: number;
  /** Interpreter used to run the code file. */
  interpreter: string;
}

export interface HarnessOutcome {
  exitClass: ExitClass;
  /** Milliseconds from spawn to exit, as measured by the harness. */
  durationMs: number;
}

export const DEFAULT_INTERPRETER = "python3";

// Reserved exit code the in-interpreter shim uses to signal that the program
// died of MemoryError. Outside the conventional 0-127 range used by programs
// and distinct from 128+N signal encodings.
const MEMORY_EXIT_CODE = 173;

// Runs inside the interpreter before the untrusted code: apply the address
// space limit to the already-running process, then hand over to the code file
// as __main__. Only MemoryError is intercepted (to make the classification
// observable from outside); everything else exits exactly as plain execution
// would, traceback on stderr included. The shim itself never touches stdout.
const BOOTSTRAP = `
import resource
import runpy
import sys
import traceback

limit = int(sys.argv[1])
path = sys.argv[2]
try:
    resource.setrlimit(resource.RLIMIT_AS, (limit, limit))
except (ValueError, OSError):
    pass
sys.argv = [path]
try:
    runpy.run_path(path, run_name="__main__")
except MemoryError:
    traceback.print_exc()
    sys.exit(${MEMORY_EXIT_CODE})
`;

/** Throws if a limit is missing or not strictly positive. */
export function checkLimits(wallMs: number, memoryBytes: number): void {
  if (!Number.isFinite(wallMs) || wallMs <= 0) {
    throw new RangeError(`wall limit must be a positive number of ms, got ${wallMs}`);
  }
  if (!Number.isFinite(memoryBytes) || memoryBytes <= 0) {
    throw new RangeError(`memory limit must be a positive number of bytes, got ${memoryBytes}`);
  }
}

/**
 * Run one program under the configured limits and classify the outcome.
 *
 * Resolves, never rejects: every failure mode maps to an exit class so the
 * caller can always produce a metadata record.
 */
export function runWithLimits(config: HarnessConfig): Promise<HarnessOutcome> {
  checkLimits(config.wallMs, config.memoryBytes);
  const started = Date.now();
  const finish = (exitClass: ExitClass): HarnessOutcome => ({
    exitClass,
    durationMs: Date.now() - started,
  });

  if (!fs.existsSync(config.codePath)) {
    return Promise.resolve(finish("harness_error"));
  }

  return new Promise((resolve) => {
    const child = spawn(
      config.interpreter,
      ["-c", BOOTSTRAP, String(config.memoryBytes), config.codePath],
      { stdio: ["ignore", "inherit", "inherit"] },
    );

    // SIGKILL rather than SIGTERM: the program is untrusted and may ignore
    // catchable signals. The kill lands well inside the caller's grace
    // allowance because there is no shutdown handshake to wait for.
    let timedOut = false;
    const killer = setTimeout(() => {
      timedOut = true;
      child.kill("SIGKILL");
    }, config.wallMs);

    child.once("error", () => {
      clearTimeout(killer);
      resolve(finish("harness_error"));
    });

    child.once("exit", (code) => {
      clearTimeout(killer);
      if (timedOut) {
        resolve(finish("timeout"));
      } else if (code === MEMORY_EXIT_CODE) {
        resolve(finish("memory_kill"));
      } else if (code === 0) {
        resolve(finish("ok"));
      } else {
        resolve(finish("nonzero_exit"));
      }
    });
  });
}

/**
 * Write the outcome as exactly one JSON line.
 *
 * The record goes to its own file, never to stdout, so program output stays
 * untouched. Callers read the first line and ignore anything after it; we
 * write one line and nothing after it.
 */
export function writeMetadata(path: string, outcome: HarnessOutcome): void {
  const record = {
    exit_class: outcome.exitClass,
    duration_ms: outcome.durationMs,
  };
  fs.writeFileSync(path, JSON.stringify(record) + "\n", "utf-8");
}
