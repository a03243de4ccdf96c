/** DOM wiring: sliders and fields drive debounced renders against the service. */

import { ApiError, ServiceClient, type ModelInfo } from "./api.js";
import { RenderScheduler } from "./scheduler.js";
import { clampState, defaultState, toRenderParams, type ConnectionStatus,
         type ViewerState } from "./state.js";
import { renderStrip } from "./multiview.js";

const SLIDER_STEPS = 200;

export class ViewerApp {
  state!: ViewerState;
  info: ModelInfo | null = null;
  status: ConnectionStatus = "connecting";
  private scheduler: RenderScheduler<ViewerState, Blob> | null = null;
  private objectUrl: string | null = null;

  constructor(
    private readonly doc: Document,
    private readonly client: ServiceClient,
    private readonly debounceMs = 150,
  ) {}

  private el<T extends HTMLElement>(id: string): T {
    const node = this.doc.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
  }

  /** Fetch /model/info and bind every control to its advertised bounds. */
  async start(): Promise<void> {
    try {
      this.info = await this.client.modelInfo();
    } catch {
      this.setStatus("disconnected");
      return;
    }
    this.setStatus("connected");
    const info = this.info;
    this.state = defaultState(info);

    this.bindSlider("pitch", info.pitch_range, (v) => ({ pitch: v }));
    this.bindSlider("yaw", info.yaw_range, (v) => ({ yaw: v }));

    const split = this.el<HTMLInputElement>("split-index");
    split.min = "0";
    split.max = String(info.split_index_max);
    split.step = "1";
    split.value = String(this.state.splitIndex);
    split.addEventListener("input", () => {
      this.update({ splitIndex: Number(split.value) });
      this.el<HTMLElement>("split-index-value").textContent = String(this.state.splitIndex);
    });

    const seed = this.el<HTMLInputElement>("seed");
    seed.value = String(this.state.seed);
    seed.addEventListener("change", () => {
      this.update({ seed: Number(seed.value) });
      seed.value = String(this.state.seed);
    });

    const styleSeed = this.el<HTMLInputElement>("style-seed");
    styleSeed.addEventListener("change", () => {
      if (styleSeed.value === "") {
        this.update({ style: { kind: "none" } });
      } else {
        this.update({ style: { kind: "seed", seed: Number(styleSeed.value) } });
      }
    });

    const upload = this.el<HTMLInputElement>("style-upload");
    upload.addEventListener("change", () => {
      const file = upload.files?.[0];
      if (file) void this.loadStyleFile(file);
    });

    this.el<HTMLButtonElement>("multiview").addEventListener("click", () => {
      void this.showStrip();
    });

    this.scheduler = new RenderScheduler<ViewerState, Blob>({
      send: (state) => this.client.render(toRenderParams(state, info)),
      onResult: (_state, blob, latency) => this.showImage(blob, latency),
      onError: (_state, error) => this.showError(error),
      debounceMs: this.debounceMs,
    });
    this.scheduler.request(this.state);
  }

  private bindSlider(id: string, range: [number, number],
                     patch: (v: number) => Partial<ViewerState>): void {
    const slider = this.el<HTMLInputElement>(id);
    const [lo, hi] = range;
    slider.min = String(lo);
    slider.max = String(hi);
    slider.step = String((hi - lo) / SLIDER_STEPS);
    const initial = id === "pitch" ? this.state.pitch : this.state.yaw;
    slider.value = String(initial);
    slider.addEventListener("input", () => {
      this.update(patch(Number(slider.value)));
    });
  }

  /** Clamp the patched state to the advertised bounds and schedule a render. */
  update(patch: Partial<ViewerState>): void {
    if (!this.info) return;
    this.state = clampState({ ...this.state, ...patch }, this.info);
    this.scheduler?.request(this.state);
  }

  private async loadStyleFile(file: File): Promise<void> {
    const buffer = await file.arrayBuffer();
    const b64 = bytesToBase64(new Uint8Array(buffer));
    // preview shows exactly the payload later sent to the service
    this.el<HTMLImageElement>("style-preview").src = `data:image/png;base64,${b64}`;
    this.update({ style: { kind: "image", b64 } });
  }

  private showImage(blob: Blob, latencyMs: number): void {
    const img = this.el<HTMLImageElement>("result");
    if (typeof URL.createObjectURL === "function") {
      if (this.objectUrl) URL.revokeObjectURL(this.objectUrl);
      this.objectUrl = URL.createObjectURL(blob);
      img.src = this.objectUrl;
    }
    this.el<HTMLElement>("latency").textContent = `${latencyMs.toFixed(0)} ms`;
    this.el<HTMLElement>("toast").hidden = true;
  }

  private showError(error: unknown): void {
    const toast = this.el<HTMLElement>("toast");
    if (error instanceof ApiError && error.status < 500) {
      this.el<HTMLElement>("field-error").textContent = error.message;
    } else {
      toast.textContent = "render failed; adjust a control to retry";
      toast.hidden = false;
    }
  }

  private async showStrip(): Promise<void> {
    if (!this.info) return;
    const strip = this.el<HTMLElement>("strip");
    strip.textContent = "";
    try {
      const blobs = await renderStrip(this.client, this.state, this.info, 5);
      for (const blob of blobs) {
        const img = this.doc.createElement("img");
        if (typeof URL.createObjectURL === "function") {
          img.src = URL.createObjectURL(blob);
        }
        img.className = "strip-view";
        strip.appendChild(img);
      }
    } catch (error) {
      this.showError(error);
    }
  }

  private setStatus(status: ConnectionStatus): void {
    this.status = status;
    const banner = this.el<HTMLElement>("banner");
    banner.hidden = status === "connected";
    if (status === "disconnected") {
      banner.textContent = "service unreachable";
      for (const node of Array.from(this.doc.querySelectorAll("input, button"))) {
        (node as HTMLInputElement | HTMLButtonElement).disabled = true;
      }
    }
  }
}

function bytesToBase64(bytes: Uint8Array): string {
  let binary = "";
  const chunk = 0x8000;
  for (let i = 0; i < bytes.length; i += chunk) {
    binary += String.fromCharCode(...bytes.subarray(i, i + chunk));
  }
  return btoa(binary);
}

export function boot(): void {
  const base = (window as unknown as { SERVICE_URL?: string }).SERVICE_URL ?? "";
  const app = new ViewerApp(document, new ServiceClient(base));
  void app.start();
}

declare global {
  interface Window {
    blendfieldBoot?: () => void;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined"
    && document.getElementById("result")) {
  window.blendfieldBoot = boot;
  boot();
}
