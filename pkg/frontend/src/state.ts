import { SurfacePointData } from "./mesh.js";
import type { Vec3 } from "./math.js";

/** Click-buffer state machine for one annotation session.
 *
 * Two picks on the object trigger a transfer; re-clicking restarts the pair
 * and overwrites the previous preview. The buffer never exceeds two picks.
 */
export interface BufferedPick {
  point: SurfacePointData;
  position: Vec3;
}

export type ClickOutcome =
  | { kind: "buffered" }
  | { kind: "transfer"; click1: SurfacePointData; click2: Vec3 };

export class ViewState {
  activePatch: number;
  clickBuffer: BufferedPick[] = [];
  committed = new Set<number>();
  previewed = new Set<number>();

  constructor(public patchIds: number[], committed: number[] = []) {
    if (patchIds.length === 0) throw new Error("session has no patches");
    this.activePatch = patchIds[0];
    committed.forEach((p) => this.committed.add(p));
  }

  setActive(patchId: number): void {
    if (!this.patchIds.includes(patchId)) throw new Error(`unknown patch ${patchId}`);
    this.activePatch = patchId;
    this.clickBuffer = [];
  }

  /** Advances to the next patch; returns false past the last one (export time). */
  nextContact(): boolean {
    const idx = this.patchIds.indexOf(this.activePatch);
    if (idx + 1 >= this.patchIds.length) return false;
    this.setActive(this.patchIds[idx + 1]);
    return true;
  }

  registerPick(pick: BufferedPick): ClickOutcome {
    if (this.clickBuffer.length >= 2) this.clickBuffer = [];
    this.clickBuffer.push(pick);
    if (this.clickBuffer.length === 2) {
      const [first, second] = this.clickBuffer;
      return { kind: "transfer", click1: first.point, click2: second.position };
    }
    return { kind: "buffered" };
  }

  transferSucceeded(patchId: number): void {
    this.previewed.add(patchId);
    this.clickBuffer = [];
  }

  transferFailed(): void {
    this.clickBuffer = [];
  }

  commitApplied(committed: number[]): void {
    this.committed = new Set(committed);
  }

  canExport(): boolean {
    return this.committed.size > 0;
  }
}
