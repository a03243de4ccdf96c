/** Typed client for the render service HTTP API. */

export interface ModelInfo {
  n_sites: number;
  split_index_max: number;
  resolution_default: number;
  resolutions: number[];
  pitch_range: [number, number];
  yaw_range: [number, number];
  style_code_dim: number;
  feature_grid_size: number;
}

export interface RenderParams {
  seed: number;
  pitch: number;
  yaw: number;
  split_index: number;
  resolution?: number;
  style_b64?: string;
  style_seed?: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorMessage(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { error?: string };
    return body.error ?? `request failed with status ${res.status}`;
  } catch {
    return `request failed with status ${res.status}`;
  }
}

export class ServiceClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: typeof fetch = globalThis.fetch.bind(globalThis),
  ) {}

  async health(): Promise<boolean> {
    try {
      const res = await this.fetchFn(`${this.base}/health`);
      return res.ok;
    } catch {
      return false;
    }
  }

  async modelInfo(): Promise<ModelInfo> {
    const res = await this.fetchFn(`${this.base}/model/info`);
    if (!res.ok) throw new ApiError(res.status, await errorMessage(res));
    return (await res.json()) as ModelInfo;
  }

  async render(params: RenderParams): Promise<Blob> {
    const res = await this.fetchFn(`${this.base}/render`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(params),
    });
    if (!res.ok) throw new ApiError(res.status, await errorMessage(res));
    return await res.blob();
  }

  async encodeStyle(imageB64: string): Promise<number[]> {
    const res = await this.fetchFn(`${this.base}/style/encode`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ image_b64: imageB64 }),
    });
    if (!res.ok) throw new ApiError(res.status, await errorMessage(res));
    const body = (await res.json()) as { code: number[] };
    return body.code;
  }
}
