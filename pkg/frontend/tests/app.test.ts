import { describe, expect, it, vi } from "vitest";

import type { MeshPayload } from "../src/api.js";
import { EditorApp, ViewHooks } from "../src/app.js";
import { decodeState } from "../src/state.js";

const MESH: MeshPayload = { vertices: [0, 0, 0, 1, 0, 0, 0, 1, 0], faces: [0, 1, 2] };
const GRID = { resolution: 1, points: new Array(24).fill(0) };

function makeApi(overrides: Partial<Record<string, unknown>> = {}) {
  return {
    listShapes: vi.fn(async () => [
      { id: "a", point_count: 10, has_mesh: true },
      { id: "b", point_count: 12, has_mesh: true },
    ]),
    getMesh: vi.fn(async () => MESH),
    getGrid: vi.fn(async () => GRID),
    getPca: vi.fn(async () => ({
      resolution: 1,
      n_components: 2,
      variances: [4, 1],
      explained_variance_ratio: [0.8, 0.2],
    })),
    deform: vi.fn(async (_id: string, coeffs: number[]) => ({
      ...MESH,
      grid: GRID,
      base_grid: GRID,
      coeffs,
    })),
    transfer: vi.fn(async () => ({ ...MESH, grid: GRID })),
    ...overrides,
  };
}

function makeView() {
  const banners: Array<string | null> = [];
  const hooks: ViewHooks = {
    renderMesh: vi.fn(),
    renderTransfer: vi.fn(),
    showBanner: (m) => banners.push(m),
    stateChanged: vi.fn(),
  };
  return { hooks, banners };
}

async function flush() {
  await new Promise((r) => setTimeout(r, 5));
}

describe("EditorApp", () => {
  it("start() loads shapes, pca, and the first mesh", async () => {
    const api = makeApi();
    const { hooks } = makeView();
    const app = new EditorApp(api as never, hooks, 1);
    await app.start("");
    expect(app.state.shapeId).toBe("a");
    expect(hooks.renderMesh).toHaveBeenCalled();
    expect(app.pca?.n_components).toBe(2);
  });

  it("restores a shared session from the URL query", async () => {
    const api = makeApi();
    const { hooks } = makeView();
    const app = new EditorApp(api as never, hooks, 1);
    await app.start("?shape=b&t=1.5,-2&wire=1");
    expect(app.state.shapeId).toBe("b");
    expect(app.state.sliders[0]).toBe(1.5);
    expect(app.state.wireframe).toBe(true);
    await flush();
    // nonzero sliders re-request the deformation for the restored state
    expect(api.deform).toHaveBeenCalledWith("b", [1.5, -2]);
    // and the state re-encodes to an equivalent query
    expect(decodeState(app.encodeUrlQuery())).toEqual(app.state);
  });

  it("slider moves send only the first n_components coefficients", async () => {
    const api = makeApi();
    const { hooks } = makeView();
    const app = new EditorApp(api as never, hooks, 1);
    await app.start("");
    app.setSlider(0, 2);
    await flush();
    expect(api.deform).toHaveBeenLastCalledWith("a", [2, 0]);
  });

  it("server failure raises the banner and leaves slider state intact", async () => {
    const api = makeApi({
      deform: vi.fn(async () => {
        throw new Error("connection refused");
      }),
    });
    const { hooks, banners } = makeView();
    const app = new EditorApp(api as never, hooks, 1);
    await app.start("");
    app.setSlider(1, 2.5);
    await flush();
    expect(banners.at(-1)).toContain("connection refused");
    expect(app.state.sliders[1]).toBe(2.5); // state preserved through the error
    expect(app.state.shapeId).toBe("a");
  });

  it("reset zeroes the coefficients and restores the base mesh", async () => {
    const api = makeApi();
    const { hooks } = makeView();
    const app = new EditorApp(api as never, hooks, 1);
    await app.start("");
    app.setSlider(0, 3);
    await flush();
    app.reset();
    expect(app.state.sliders.every((v) => v === 0)).toBe(true);
    const lastRender = (hooks.renderMesh as ReturnType<typeof vi.fn>).mock.calls.at(-1)!;
    expect(lastRender[0]).toBe(app.baseMesh);
  });

  it("transfer failures surface without clearing the pairing", async () => {
    const api = makeApi({
      transfer: vi.fn(async () => {
        throw new Error("resolution_mismatch: 4 vs 8");
      }),
    });
    const { hooks, banners } = makeView();
    const app = new EditorApp(api as never, hooks, 1);
    await app.start("");
    app.setTransferPair("a", "b");
    const result = await app.runTransfer();
    expect(result).toBeNull();
    expect(banners.at(-1)).toContain("resolution_mismatch");
    expect(app.state.transferSource).toBe("a");
    expect(app.state.transferTarget).toBe("b");
  });

  it("touches only the stateless query endpoints", async () => {
    const api = makeApi();
    const { hooks } = makeView();
    const app = new EditorApp(api as never, hooks, 1);
    await app.start("");
    app.setSlider(0, 1);
    await flush();
    app.setTransferPair("a", "b");
    await app.runTransfer();
    const called = Object.entries(api)
      .filter(([, fn]) => (fn as ReturnType<typeof vi.fn>).mock?.calls.length > 0)
      .map(([name]) => name);
    expect(called.sort()).toEqual(
      ["deform", "getGrid", "getMesh", "getPca", "listShapes", "transfer"].sort(),
    );
  });
});
