import type { Vec3 } from "./math.js";

/** Mesh payload exactly as the session endpoint serves it. */
export interface MeshData {
  vertices: number[][];
  faces: number[][];
}

export interface SurfacePointData {
  face: number;
  bary: [number, number, number];
}

export function vertex(mesh: MeshData, i: number): Vec3 {
  const v = mesh.vertices[i];
  return [v[0], v[1], v[2]];
}

export function faceVertices(mesh: MeshData, face: number): [Vec3, Vec3, Vec3] {
  const f = mesh.faces[face];
  return [vertex(mesh, f[0]), vertex(mesh, f[1]), vertex(mesh, f[2])];
}

export function embed(mesh: MeshData, sp: SurfacePointData): Vec3 {
  const [a, b, c] = faceVertices(mesh, sp.face);
  const [wa, wb, wc] = sp.bary;
  return [
    wa * a[0] + wb * b[0] + wc * c[0],
    wa * a[1] + wb * b[1] + wc * c[1],
    wa * a[2] + wb * b[2] + wc * c[2],
  ];
}

export function boundingBox(mesh: MeshData): { lo: Vec3; hi: Vec3; center: Vec3; radius: number } {
  const lo: Vec3 = [Infinity, Infinity, Infinity];
  const hi: Vec3 = [-Infinity, -Infinity, -Infinity];
  for (const v of mesh.vertices) {
    for (let k = 0; k < 3; k++) {
      lo[k] = Math.min(lo[k], v[k]);
      hi[k] = Math.max(hi[k], v[k]);
    }
  }
  const center: Vec3 = [(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2];
  const radius = Math.max(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]) / 2;
  return { lo, hi, center, radius };
}
