/**
 * Typed client for the editor service. Read-only from the UI's point of
 * view: every call is a pure query, nothing mutates server state.
 */

export interface ShapeEntry {
  id: string;
  point_count: number;
  has_mesh: boolean;
}

export interface MeshPayload {
  vertices: number[]; // flat xyz
  faces: number[]; // flat triangle indices, empty for pointclouds
}

export interface GridPayload {
  resolution: number;
  points: number[]; // flat xyz, (r+1)^3 nodes
}

export interface DeformResponse extends MeshPayload {
  grid: GridPayload;
  base_grid: GridPayload;
}

export interface TransferResponse extends MeshPayload {
  grid: GridPayload;
}

export interface PcaInfo {
  resolution: number;
  n_components: number;
  variances: number[];
  explained_variance_ratio: number[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
  ) {
    super(`${code}${detail ? `: ${detail}` : ""}`);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const code = typeof body?.error === "string" ? body.error : `http_${response.status}`;
    throw new ApiError(response.status, code, body?.detail ?? "");
  }
  return body as T;
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  async listShapes(): Promise<ShapeEntry[]> {
    return asJson(await fetch(this.url("/shapes")));
  }

  async getMesh(shapeId: string): Promise<MeshPayload> {
    return asJson(await fetch(this.url(`/shapes/${encodeURIComponent(shapeId)}/mesh`)));
  }

  async getGrid(shapeId: string): Promise<GridPayload> {
    return asJson(await fetch(this.url(`/shapes/${encodeURIComponent(shapeId)}/grid`)));
  }

  async getPca(): Promise<PcaInfo> {
    return asJson(await fetch(this.url("/pca")));
  }

  async deform(shapeId: string, coeffs: number[]): Promise<DeformResponse> {
    return asJson(
      await fetch(this.url("/deform"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ shape_id: shapeId, coeffs }),
      }),
    );
  }

  async transfer(sourceId: string, targetId: string): Promise<TransferResponse> {
    return asJson(
      await fetch(this.url("/transfer"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ source_id: sourceId, target_id: targetId }),
      }),
    );
  }
}
