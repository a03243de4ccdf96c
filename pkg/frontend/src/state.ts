/** Viewer state and clamping against the bounds advertised by /model/info. */

import type { ModelInfo, RenderParams } from "./api.js";

export type StyleSource =
  | { kind: "none" }
  | { kind: "seed"; seed: number }
  | { kind: "image"; b64: string };

export interface ViewerState {
  seed: number;
  pitch: number;
  yaw: number;
  splitIndex: number;
  style: StyleSource;
}

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export function defaultState(info: ModelInfo): ViewerState {
  return {
    seed: 0,
    pitch: mid(info.pitch_range),
    yaw: mid(info.yaw_range),
    splitIndex: info.split_index_max,
    style: { kind: "none" },
  };
}

function mid([lo, hi]: [number, number]): number {
  return (lo + hi) / 2;
}

function clampNumber(value: number, lo: number, hi: number): number {
  if (Number.isNaN(value)) return lo;
  return Math.min(hi, Math.max(lo, value));
}

/** Force every field inside the advertised bounds; split index is an integer. */
export function clampState(state: ViewerState, info: ModelInfo): ViewerState {
  return {
    ...state,
    seed: Math.round(Number.isFinite(state.seed) ? state.seed : 0),
    pitch: clampNumber(state.pitch, info.pitch_range[0], info.pitch_range[1]),
    yaw: clampNumber(state.yaw, info.yaw_range[0], info.yaw_range[1]),
    splitIndex: Math.round(clampNumber(state.splitIndex, 0, info.split_index_max)),
  };
}

export function toRenderParams(state: ViewerState, info: ModelInfo): RenderParams {
  const clamped = clampState(state, info);
  const params: RenderParams = {
    seed: clamped.seed,
    pitch: clamped.pitch,
    yaw: clamped.yaw,
    split_index: clamped.splitIndex,
    resolution: info.resolution_default,
  };
  if (clamped.style.kind === "seed") params.style_seed = clamped.style.seed;
  if (clamped.style.kind === "image") params.style_b64 = clamped.style.b64;
  return params;
}
