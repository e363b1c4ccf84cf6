import { describe, expect, it } from "vitest";

import { DEFAULT_OPTIONS, layoutView } from "../src/layout.js";
import { BiclusterInfo, SchemaResponse } from "../src/types.js";
import fixture from "./fixtures/session.json";

const schema = fixture.schema as SchemaResponse;
const biclusters = fixture.biclusters.biclusters as BiclusterInfo[];

describe("layoutView", () => {
  const layout = layoutView(schema, biclusters, DEFAULT_OPTIONS);

  it("places every entity and bicluster", () => {
    const total = schema.domains.reduce((n, d) => n + d.entities.length, 0);
    expect(layout.entities.size).toBe(total);
    expect(layout.biclusters.size).toBe(biclusters.length);
  });

  it("orders entities by descending frequency within a domain", () => {
    for (const domain of schema.domains) {
      const ys = [...domain.entities]
        .sort((a, b) => b.frequency - a.frequency)
        .map((e) => layout.entities.get(e.id)!.y);
      const sorted = [...ys].sort((a, b) => a - b);
      expect(ys).toEqual(sorted);
    }
  });

  it("maps bundle length linearly in related-entity count", () => {
    for (const relation of schema.relations) {
      const inRel = biclusters.filter((b) => b.relation === relation.id);
      if (inRel.length < 2) continue;
      const bySize = [...inRel].sort(
        (a, b) => a.left.length + a.right.length - (b.left.length + b.right.length),
      );
      const smallest = layout.biclusters.get(bySize[0]!.id)!;
      const largest = layout.biclusters.get(bySize[bySize.length - 1]!.id)!;
      expect(smallest.height).toBeLessThanOrEqual(largest.height);
      expect(largest.height).toBe(DEFAULT_OPTIONS.maxBundleLength);
    }
  });

  it("splits bundle fill by left/right entity proportion", () => {
    for (const b of biclusters) {
      const box = layout.biclusters.get(b.id)!;
      expect(box.leftFraction).toBeCloseTo(
        b.left.length / (b.left.length + b.right.length),
      );
    }
  });

  it("emits one cubic Bezier edge per bicluster membership", () => {
    const expected = biclusters.reduce(
      (n, b) => n + b.left.length + b.right.length,
      0,
    );
    expect(layout.edges.length).toBe(expected);
    for (const e of layout.edges.slice(0, 25)) {
      expect(e.path).toMatch(/^M [\d. -]+ C /);
    }
  });

  it("keeps frequency sub-bars inside the entity rectangle", () => {
    for (const box of layout.entities.values()) {
      expect(box.frequencyBar).toBeGreaterThan(0);
      expect(box.frequencyBar).toBeLessThan(box.width);
    }
  });
});
