/**
 * Editor state and its URL-query serialization.
 *
 * The whole session is reconstructable from the query string, so URLs are
 * shareable; encode/decode round-trips losslessly (numbers use JS shortest
 * round-trip formatting).
 */

export const SLIDER_COUNT = 8;
export const SLIDER_LIMIT = 3; // std-dev units

export interface EditorState {
  shapeId: string | null;
  sliders: number[]; // length SLIDER_COUNT, each clamped to [-3, 3]
  wireframe: boolean;
  deviation: boolean;
  transferSource: string | null;
  transferTarget: string | null;
}

export function defaultState(): EditorState {
  return {
    shapeId: null,
    sliders: new Array(SLIDER_COUNT).fill(0),
    wireframe: false,
    deviation: false,
    transferSource: null,
    transferTarget: null,
  };
}

export function clampSlider(value: number): number {
  if (!Number.isFinite(value)) return 0;
  return Math.min(SLIDER_LIMIT, Math.max(-SLIDER_LIMIT, value));
}

export function withSlider(state: EditorState, index: number, value: number): EditorState {
  const sliders = state.sliders.slice();
  sliders[index] = clampSlider(value);
  return { ...state, sliders };
}

export function activeCoeffs(state: EditorState, componentCount: number): number[] {
  return state.sliders.slice(0, Math.min(SLIDER_COUNT, componentCount));
}

export function encodeState(state: EditorState): string {
  const params = new URLSearchParams();
  if (state.shapeId !== null) params.set("shape", state.shapeId);
  if (state.sliders.some((v) => v !== 0)) params.set("t", state.sliders.map(String).join(","));
  if (state.wireframe) params.set("wire", "1");
  if (state.deviation) params.set("dev", "1");
  if (state.transferSource !== null) params.set("src", state.transferSource);
  if (state.transferTarget !== null) params.set("dst", state.transferTarget);
  return params.toString();
}

export function decodeState(query: string): EditorState {
  const params = new URLSearchParams(query);
  const state = defaultState();
  state.shapeId = params.get("shape");
  const t = params.get("t");
  if (t !== null) {
    const parts = t.split(",").map((x) => clampSlider(Number(x)));
    for (let i = 0; i < Math.min(parts.length, SLIDER_COUNT); i++) {
      state.sliders[i] = parts[i];
    }
  }
  state.wireframe = params.get("wire") === "1";
  state.deviation = params.get("dev") === "1";
  state.transferSource = params.get("src");
  state.transferTarget = params.get("dst");
  return state;
}
