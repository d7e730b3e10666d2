import {
  Mat4,
  Vec3,
  add,
  cross,
  mat4LookAt,
  mat4Multiply,
  mat4Perspective,
  normalize,
  scale,
  sub,
} from "./math.js";

/** Orbit camera per viewport: yaw/pitch around a target with zoomable radius. */
export class OrbitCamera {
  yaw: number;
  pitch: number;
  distance: number;
  target: Vec3;
  fovY = Math.PI / 4;

  private home: { yaw: number; pitch: number; distance: number; target: Vec3 };

  constructor(target: Vec3, distance: number, yaw = 0.5, pitch = 0.3) {
    this.target = [...target] as Vec3;
    this.distance = distance;
    this.yaw = yaw;
    this.pitch = pitch;
    this.home = { yaw, pitch, distance, target: [...target] as Vec3 };
  }

  reset(): void {
    this.yaw = this.home.yaw;
    this.pitch = this.home.pitch;
    this.distance = this.home.distance;
    this.target = [...this.home.target] as Vec3;
  }

  rotate(dYaw: number, dPitch: number): void {
    this.yaw += dYaw;
    const limit = Math.PI / 2 - 0.01;
    this.pitch = Math.max(-limit, Math.min(limit, this.pitch + dPitch));
  }

  zoom(factor: number): void {
    this.distance = Math.max(1e-3, this.distance * factor);
  }

  eye(): Vec3 {
    const cp = Math.cos(this.pitch);
    const offset: Vec3 = [
      cp * Math.sin(this.yaw),
      Math.sin(this.pitch),
      cp * Math.cos(this.yaw),
    ];
    return add(this.target, scale(offset, this.distance));
  }

  viewMatrix(): Mat4 {
    return mat4LookAt(this.eye(), this.target, [0, 1, 0]);
  }

  viewProjection(width: number, height: number): Mat4 {
    const proj = mat4Perspective(this.fovY, width / height, this.distance / 100, this.distance * 100);
    return mat4Multiply(proj, this.viewMatrix());
  }

  /** World-space ray through a pixel; (0,0) is the top-left corner. */
  rayThroughPixel(px: number, py: number, width: number, height: number): { origin: Vec3; dir: Vec3 } {
    const ndcX = (2 * (px + 0.5)) / width - 1;
    const ndcY = 1 - (2 * (py + 0.5)) / height;
    const tanF = Math.tan(this.fovY / 2);
    const aspect = width / height;
    const eye = this.eye();
    const forward = normalize(sub(this.target, eye));
    const right = normalize(cross(forward, [0, 1, 0]));
    const up = cross(right, forward);
    const dir = normalize(add(
      forward,
      add(scale(right, ndcX * tanF * aspect), scale(up, ndcY * tanF)),
    ));
    return { origin: eye, dir };
  }
}
