import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import {
  nodeDegrees,
  normalizedDegrees,
  pairCount,
  thresholdEdges,
} from "../src/threshold.js";
import type { NetworkEdge, NetworkFrame } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));

interface Fixture {
  network: NetworkFrame;
  expected: Record<string, [number, number][]>;
}

function loadFixture(name: string): Fixture {
  return JSON.parse(
    readFileSync(join(here, "fixtures", name), "utf-8"),
  ) as Fixture;
}

function edge(i: number, j: number, w: number): NetworkEdge {
  return { i, j, w, w_im: null, lag: null };
}

/** Numeric (i, j) ordering; JS default sort compares as strings. */
export function sortPairs(pairs: [number, number][]): [number, number][] {
  return pairs.sort((a, b) => (a[0] !== b[0] ? a[0] - b[0] : a[1] - b[1]));
}

describe("engine parity", () => {
  for (const name of ["threshold_coh.json", "threshold_imagcohy.json"]) {
    const { network, expected } = loadFixture(name);
    for (const [fraction, want] of Object.entries(expected)) {
      it(`${name} @ ${fraction} matches the engine edge set`, () => {
        const kept = thresholdEdges(
          network.edges,
          Number(fraction),
          network.nodes.length,
        );
        const got = sortPairs(kept.map((e) => [e.i, e.j]));
        expect(got).toEqual(sortPairs(want));
      });
    }
  }
});

describe("threshold rule", () => {
  it("keeps ceil(fraction * nPairs) edges", () => {
    const edges = [edge(0, 1, 0.1), edge(0, 2, 0.5), edge(1, 2, 0.9)];
    expect(pairCount(3)).toBe(3);
    expect(thresholdEdges(edges, 0.34, 3)).toHaveLength(2); // ceil(1.02)
    expect(thresholdEdges(edges, 0.01, 3)).toHaveLength(1);
    expect(thresholdEdges(edges, 1, 3)).toHaveLength(3);
  });

  it("ranks by |weight| so strong negative edges survive", () => {
    const edges = [edge(0, 1, 0.2), edge(0, 2, -0.9)];
    const kept = thresholdEdges(edges, 0.2, 3); // ceil(0.6) = 1
    expect(kept).toEqual([edge(0, 2, -0.9)]);
  });

  it("breaks exact ties by (i, j) lexicographic order", () => {
    const edges = [edge(1, 2, 0.5), edge(0, 2, 0.5), edge(0, 1, 0.5)];
    const kept = thresholdEdges(edges, 0.5, 3); // ceil(1.5) = 2
    expect(kept.map((e) => [e.i, e.j])).toEqual([
      [0, 1],
      [0, 2],
    ]);
  });

  it("rejects fractions outside (0, 1]", () => {
    expect(() => thresholdEdges([], 0, 3)).toThrow(RangeError);
    expect(() => thresholdEdges([], 1.5, 3)).toThrow(RangeError);
  });

  it("re-thresholding an already sparse frame uses the full pair count", () => {
    // 16 nodes -> 120 pairs; a 10%-thresholded frame carries 12 edges and
    // re-thresholding at 5% must keep ceil(0.05 * 120) = 6, not ceil of 12.
    const edges = Array.from({ length: 12 }, (_, k) =>
      edge(0, k + 1, 1 - k / 20),
    );
    expect(thresholdEdges(edges, 0.05, 16)).toHaveLength(6);
  });
});

describe("node degrees", () => {
  it("counts both endpoints", () => {
    const deg = nodeDegrees([edge(0, 1, 1), edge(0, 2, 1)], 4);
    expect(deg).toEqual([2, 1, 1, 0]);
  });

  it("two nodes with one edge have equal (maximal) size", () => {
    expect(normalizedDegrees([edge(0, 1, 0.5)], 2)).toEqual([1, 1]);
  });

  it("an empty network normalizes to all zeros without dividing by zero", () => {
    expect(normalizedDegrees([], 3)).toEqual([0, 0, 0]);
  });
});
