import { BiclusterInfo, SchemaResponse } from "./types.js";

/**
 * Positions for the list-based layout: one vertical entity list per
 * domain, bicluster rectangles in the gap between adjacent lists, and
 * cubic Bezier edges joining entities to their bundles.
 */

export interface Rect {
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface EntityBox extends Rect {
  id: number;
  label: string;
  /** length of the frequency sub-bar, linearly mapped within the list */
  frequencyBar: number;
}

export interface BiclusterBox extends Rect {
  id: string;
  /** share of the rectangle filled for the left-domain side */
  leftFraction: number;
}

export interface EdgePath {
  id: string;
  bicluster: string;
  entity: number;
  path: string;
}

export interface Layout {
  width: number;
  height: number;
  entities: Map<number, EntityBox>;
  biclusters: Map<string, BiclusterBox>;
  edges: EdgePath[];
}

export interface LayoutOptions {
  entityWidth: number;
  entityHeight: number;
  entityGap: number;
  bundleGap: number;
  bundleWidth: number;
  minBundleLength: number;
  maxBundleLength: number;
  margin: number;
}

export const DEFAULT_OPTIONS: LayoutOptions = {
  entityWidth: 150,
  entityHeight: 18,
  entityGap: 4,
  bundleGap: 110,
  bundleWidth: 14,
  minBundleLength: 24,
  maxBundleLength: 120,
  margin: 20,
};

const linear = (
  value: number,
  lo: number,
  hi: number,
  outLo: number,
  outHi: number,
): number => {
  if (hi <= lo) return outHi;
  return outLo + ((value - lo) / (hi - lo)) * (outHi - outLo);
};

export function layoutView(
  schema: SchemaResponse,
  biclusters: BiclusterInfo[],
  opts: LayoutOptions = DEFAULT_OPTIONS,
): Layout {
  const entities = new Map<number, EntityBox>();
  const boxes = new Map<string, BiclusterBox>();
  const edges: EdgePath[] = [];

  const columnStride = opts.entityWidth + 2 * opts.bundleGap + opts.bundleWidth;
  let height = 0;

  schema.domains.forEach((domain, k) => {
    const x = opts.margin + k * columnStride;
    const sorted = [...domain.entities].sort((a, b) => b.frequency - a.frequency);
    const maxFreq = sorted.length ? sorted[0]!.frequency : 1;
    sorted.forEach((entity, row) => {
      const y = opts.margin + row * (opts.entityHeight + opts.entityGap);
      entities.set(entity.id, {
        id: entity.id,
        label: entity.label,
        x,
        y,
        width: opts.entityWidth,
        height: opts.entityHeight,
        frequencyBar: linear(entity.frequency, 0, maxFreq, 2, opts.entityWidth - 6),
      });
      height = Math.max(height, y + opts.entityHeight);
    });
  });

  schema.relations.forEach((relation, k) => {
    const inRelation = biclusters
      .filter((b) => b.relation === relation.id)
      .sort(
        (a, b) =>
          b.left.length + b.right.length - (a.left.length + a.right.length) ||
          (a.id < b.id ? -1 : 1),
      );
    if (!inRelation.length) return;
    const sizes = inRelation.map((b) => b.left.length + b.right.length);
    const lo = Math.min(...sizes);
    const hi = Math.max(...sizes);
    const x =
      opts.margin + k * columnStride + opts.entityWidth + opts.bundleGap;
    inRelation.forEach((b, row) => {
      const size = b.left.length + b.right.length;
      const length = linear(size, lo, hi, opts.minBundleLength, opts.maxBundleLength);
      const y = opts.margin + row * (opts.maxBundleLength / 3 + 14);
      boxes.set(b.id, {
        id: b.id,
        x,
        y,
        width: opts.bundleWidth,
        height: length,
        leftFraction: b.left.length / size,
      });
      height = Math.max(height, y + length);
      for (const e of b.left) {
        edges.push(edge(`${b.id}:${e}`, b.id, e, entities.get(e), boxes.get(b.id), "left"));
      }
      for (const e of b.right) {
        edges.push(edge(`${b.id}:${e}`, b.id, e, entities.get(e), boxes.get(b.id), "right"));
      }
    });
  });

  return {
    width: opts.margin * 2 + schema.domains.length * columnStride - 2 * opts.bundleGap,
    height: height + opts.margin,
    entities,
    biclusters: boxes,
    edges: edges.filter((e) => e.path !== ""),
  };
}

function edge(
  id: string,
  bicluster: string,
  entity: number,
  from: EntityBox | undefined,
  to: BiclusterBox | undefined,
  side: "left" | "right",
): EdgePath {
  if (!from || !to) return { id, bicluster, entity, path: "" };
  const y1 = from.y + from.height / 2;
  const y2 = to.y + to.height / 2;
  const x1 = side === "left" ? from.x + from.width : from.x;
  const x2 = side === "left" ? to.x : to.x + to.width;
  const mid = (x1 + x2) / 2;
  return {
    id,
    bicluster,
    entity,
    path: `M ${x1} ${y1} C ${mid} ${y1}, ${mid} ${y2}, ${x2} ${y2}`,
  };
}
