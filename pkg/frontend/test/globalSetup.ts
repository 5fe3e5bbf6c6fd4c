/** Spawns the backend with the 500-firm fixture for the e2e suite. */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export const E2E_PORT = 8971;
export const E2E_BASE = `http://127.0.0.1:${E2E_PORT}`;

let server: ChildProcess | null = null;
let dataDir: string | null = null;

async function waitForServer(base: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const response = await fetch(`${base}/datasets`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      throw new Error(`backend did not come up on ${base}`);
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
}

export async function setup(): Promise<void> {
  dataDir = mkdtempSync(join(tmpdir(), "econoforge-e2e-"));
  const gen = spawnSync(
    "python3",
    ["-m", "econoforge.cli", "gen", "--firms", "500", "--sectors", "8",
     "--regions", "6", "--years", "2013", "2014", "--seed", "7",
     "--data-dir", dataDir],
    { stdio: "inherit" },
  );
  if (gen.status !== 0) {
    throw new Error(`fixture generation failed with exit code ${gen.status}`);
  }
  server = spawn(
    "python3",
    ["-m", "econoforge.cli", "serve", "--data-dir", dataDir,
     "--port", String(E2E_PORT), "--jobs", "2"],
    { stdio: "ignore" },
  );
  await waitForServer(E2E_BASE);
}

export async function teardown(): Promise<void> {
  if (server) {
    server.kill("SIGTERM");
    server = null;
  }
  if (dataDir) {
    rmSync(dataDir, { recursive: true, force: true });
    dataDir = null;
  }
}
