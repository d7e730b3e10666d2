import { MeshData, SurfacePointData } from "./mesh.js";

export interface AxisPayload {
  waypoints: number[][];
  length: number;
  start_tangent: number[];
}

export interface PatchPayload {
  patch_id: number;
  vertices: number[];
  axis: AxisPayload;
}

export interface SessionPayload {
  session_id: string;
  image: string;
  object_id: string;
  body: MeshData;
  object: MeshData;
  patches: PatchPayload[];
  committed: number[];
  pending: number | null;
}

export interface TransferPreview {
  patch_id: number;
  points: { face: number; bary: number[]; position: number[] }[];
  pairs: [number, SurfacePointData][];
  dropped: number[];
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  const body = await resp.json();
  if (!resp.ok) {
    throw new ApiError(resp.status, (body as { error?: string }).error ?? resp.statusText);
  }
  return body as T;
}

export class AnnotationApi {
  constructor(private base: string, private sessionId: string) {}

  session(): Promise<SessionPayload> {
    return request(`${this.base}/session/${this.sessionId}`);
  }

  transfer(patchId: number, click1: SurfacePointData, click2: [number, number, number]):
      Promise<TransferPreview> {
    return request(`${this.base}/session/${this.sessionId}/transfer`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ patch_id: patchId, click1, click2 }),
    });
  }

  commit(patchId: number): Promise<{ committed: number[] }> {
    return request(`${this.base}/session/${this.sessionId}/commit`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ patch_id: patchId }),
    });
  }

  undo(): Promise<{ committed: number[] }> {
    return request(`${this.base}/session/${this.sessionId}/undo`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({}),
    });
  }

  export(): Promise<Record<string, unknown>> {
    return request(`${this.base}/session/${this.sessionId}/export`);
  }
}
