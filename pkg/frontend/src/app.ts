/**
 * DOM-free editor controller: owns the state, talks to the service, and
 * reports render/banner updates through callbacks. Server failures raise
 * the banner but never touch the state, so sliders stay where the user put
 * them and recover when the server comes back.
 */

import type { ApiClient, DeformResponse, GridPayload, MeshPayload, PcaInfo, ShapeEntry, TransferResponse } from "./api.js";
import { DeformScheduler } from "./scheduler.js";
import {
  EditorState,
  activeCoeffs,
  decodeState,
  defaultState,
  encodeState,
  withSlider,
} from "./state.js";

export interface ViewHooks {
  /** Base or deformed mesh for the main viewport, with optional grids. */
  renderMesh(mesh: MeshPayload, grid: GridPayload | null, baseMesh: MeshPayload | null): void;
  /** Style-transfer result for the side-by-side panel. */
  renderTransfer(mesh: MeshPayload | null): void;
  showBanner(message: string | null): void;
  stateChanged(state: EditorState): void;
}

export class EditorApp {
  state: EditorState = defaultState();
  shapes: ShapeEntry[] = [];
  pca: PcaInfo | null = null;
  baseMesh: MeshPayload | null = null;
  baseGrid: GridPayload | null = null;
  private scheduler: DeformScheduler<DeformResponse>;

  constructor(
    private readonly api: ApiClient,
    private readonly view: ViewHooks,
    debounceMs = 60,
  ) {
    this.scheduler = new DeformScheduler<DeformResponse>(
      {
        send: (coeffs) => {
          if (this.state.shapeId === null) return Promise.reject(new Error("no shape selected"));
          return this.api.deform(this.state.shapeId, coeffs);
        },
        onResult: (result) => {
          this.view.showBanner(null);
          this.view.renderMesh(result, result.grid, this.baseMesh);
        },
        onError: (error) => this.fail(error),
      },
      debounceMs,
    );
  }

  private fail(error: unknown): void {
    const message = error instanceof Error ? error.message : String(error);
    this.view.showBanner(`server error: ${message}`);
  }

  private emitState(): void {
    this.view.stateChanged(this.state);
  }

  async start(query: string): Promise<void> {
    this.state = decodeState(query);
    try {
      this.shapes = await this.api.listShapes();
      this.pca = await this.api.getPca();
      this.view.showBanner(null);
    } catch (error) {
      this.fail(error);
      return;
    }
    if (this.state.shapeId === null && this.shapes.length > 0) {
      this.state = { ...this.state, shapeId: this.shapes[0].id };
    }
    if (this.state.shapeId !== null) {
      await this.loadShape(this.state.shapeId, true);
    }
    this.emitState();
  }

  /** Fetch the base mesh/grid and re-apply any nonzero sliders. */
  async loadShape(shapeId: string, keepSliders = false): Promise<void> {
    this.state = keepSliders
      ? { ...this.state, shapeId }
      : { ...defaultState(), ...pickTransfer(this.state), shapeId };
    try {
      this.baseMesh = await this.api.getMesh(shapeId);
      this.baseGrid = await this.api.getGrid(shapeId).catch(() => null);
      this.view.showBanner(null);
    } catch (error) {
      this.fail(error);
      return;
    }
    this.view.renderMesh(this.baseMesh, this.baseGrid, this.baseMesh);
    if (this.pca !== null && this.state.sliders.some((v) => v !== 0)) {
      this.scheduler.request(activeCoeffs(this.state, this.pca.n_components));
    }
    this.emitState();
  }

  /** Slider move: clamp, update state, debounce a deform request. */
  setSlider(index: number, value: number): void {
    this.state = withSlider(this.state, index, value);
    if (this.pca !== null && this.state.shapeId !== null) {
      this.scheduler.request(activeCoeffs(this.state, this.pca.n_components));
    }
    this.emitState();
  }

  /** Reset button: zero all coefficients and restore the base mesh. */
  reset(): void {
    this.state = { ...this.state, sliders: this.state.sliders.map(() => 0) };
    if (this.baseMesh !== null) {
      this.view.renderMesh(this.baseMesh, this.baseGrid, this.baseMesh);
    }
    this.emitState();
  }

  setOverlay(which: "wireframe" | "deviation", on: boolean): void {
    this.state = { ...this.state, [which]: on };
    this.emitState();
  }

  setTransferPair(source: string | null, target: string | null): void {
    this.state = { ...this.state, transferSource: source, transferTarget: target };
    this.emitState();
  }

  async runTransfer(): Promise<TransferResponse | null> {
    const { transferSource, transferTarget } = this.state;
    if (transferSource === null || transferTarget === null) return null;
    try {
      const result = await this.api.transfer(transferSource, transferTarget);
      this.view.showBanner(null);
      this.view.renderTransfer(result);
      return result;
    } catch (error) {
      this.fail(error);
      this.view.renderTransfer(null);
      return null;
    }
  }

  encodeUrlQuery(): string {
    return encodeState(this.state);
  }
}

function pickTransfer(state: EditorState): Pick<EditorState, "transferSource" | "transferTarget"> {
  return { transferSource: state.transferSource, transferTarget: state.transferTarget };
}
