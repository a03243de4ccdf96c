/** Multi-view strip: evenly spaced yaws across the advertised range. */

import type { ModelInfo, RenderParams } from "./api.js";
import type { ServiceClient } from "./api.js";
import { toRenderParams, type ViewerState } from "./state.js";

export function evenYaws(count: number, [lo, hi]: [number, number]): number[] {
  if (count < 1) throw new Error("view count must be >= 1");
  if (count === 1) return [(lo + hi) / 2];
  const step = (hi - lo) / (count - 1);
  return Array.from({ length: count }, (_, i) => lo + i * step);
}

export function stripParams(state: ViewerState, info: ModelInfo,
                            count = 5): RenderParams[] {
  return evenYaws(count, info.yaw_range).map((yaw) =>
    toRenderParams({ ...state, yaw }, info));
}

/** Render the strip sequentially (bounded service load); returns one blob per view. */
export async function renderStrip(client: ServiceClient, state: ViewerState,
                                  info: ModelInfo, count = 5): Promise<Blob[]> {
  const blobs: Blob[] = [];
  for (const params of stripParams(state, info, count)) {
    blobs.push(await client.render(params));
  }
  return blobs;
}
