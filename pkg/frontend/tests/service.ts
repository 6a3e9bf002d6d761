// Spawns the real labeling service for end-to-end tests.

import { ChildProcess, spawn } from "node:child_process";

export interface ServiceHandle {
  baseUrl: string;
  stop: () => void;
}

export function fullTree8(): unknown {
  // Full binary tree over 8 leaves; leaves first, then internal nodes.
  const nodes: { id: number; left: number | null; right: number | null }[] = [];
  for (let i = 0; i < 8; i++) nodes.push({ id: i, left: null, right: null });
  const internals: [number, number, number][] = [
    [8, 0, 1],
    [9, 2, 3],
    [10, 4, 5],
    [11, 6, 7],
    [12, 8, 9],
    [13, 10, 11],
    [14, 12, 13],
  ];
  for (const [id, left, right] of internals) nodes.push({ id, left, right });
  return {
    n: 8,
    nodes,
    payloads: ["a0", "a1", "b0", "b1", "c0", "c1", "d0", "d1"],
  };
}

/** Planted 4-cluster ground truth on the 8-leaf tree: {0,1},{2,3},{4,5},{6,7}. */
export function plantedSimilar(leafA: number, leafB: number): boolean {
  return Math.floor(leafA / 2) === Math.floor(leafB / 2);
}

export async function startService(): Promise<ServiceHandle> {
  const proc: ChildProcess = spawn(
    "python3",
    ["-m", "treecut.cli", "serve", "--port", "0"],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  const baseUrl = await new Promise<string>((resolve, reject) => {
    let buffer = "";
    const timer = setTimeout(
      () => reject(new Error(`service did not start: ${buffer}`)),
      30_000,
    );
    proc.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/listening on (http:\/\/127\.0\.0\.1:\d+)/);
      if (match) {
        clearTimeout(timer);
        resolve(match[1]);
      }
    });
    proc.stderr!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
    });
    proc.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`service exited early (${code}): ${buffer}`));
    });
  });
  return {
    baseUrl,
    stop: () => {
      proc.kill();
    },
  };
}
