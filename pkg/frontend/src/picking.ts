import { OrbitCamera } from "./camera.js";
import { MeshData, SurfacePointData, faceVertices } from "./mesh.js";
import { RayHit, Vec3, add, rayTriangle, scale } from "./math.js";

/**
 * Nearest ray/mesh intersection; barycentrics are computed against the same
 * vertex data the server holds, so its residual check accepts them.
 */
export function raycastMesh(origin: Vec3, dir: Vec3, mesh: MeshData): RayHit | null {
  let best: RayHit | null = null;
  for (let f = 0; f < mesh.faces.length; f++) {
    const [a, b, c] = faceVertices(mesh, f);
    const hit = rayTriangle(origin, dir, a, b, c);
    if (hit && (best === null || hit.t < best.t)) {
      best = {
        t: hit.t,
        face: f,
        bary: hit.bary,
        position: add(origin, scale(dir, hit.t)),
      };
    }
  }
  return best;
}

/** Screen-space pick in a viewport; null when the click misses the mesh. */
export function pickSurfacePoint(
  px: number, py: number, width: number, height: number,
  camera: OrbitCamera, mesh: MeshData,
): (SurfacePointData & { position: Vec3 }) | null {
  const ray = camera.rayThroughPixel(px, py, width, height);
  const hit = raycastMesh(ray.origin, ray.dir, mesh);
  if (!hit) return null;
  // clamp tiny negative barycentrics from edge grazing
  let [u, v, w] = hit.bary;
  u = Math.max(u, 0);
  v = Math.max(v, 0);
  w = Math.max(w, 0);
  const s = u + v + w;
  return {
    face: hit.face,
    bary: [u / s, v / s, w / s],
    position: hit.position,
  };
}
