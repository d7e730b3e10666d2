/** Fixed 12-color palette cycled over committed patches. */
export const PATCH_PALETTE: [number, number, number][] = [
  [0.18, 0.80, 0.44], // green
  [0.75, 0.22, 0.65], // magenta
  [0.55, 0.35, 0.95], // violet
  [0.80, 0.85, 0.20], // yellow-green
  [0.45, 0.25, 0.75], // purple
  [0.20, 0.80, 0.85], // cyan
  [0.90, 0.45, 0.15], // orange
  [0.85, 0.25, 0.25], // red
  [0.25, 0.45, 0.90], // blue
  [0.60, 0.80, 0.35], // lime
  [0.90, 0.60, 0.75], // pink
  [0.50, 0.65, 0.60], // teal-gray
];

export function patchColor(index: number): [number, number, number] {
  return PATCH_PALETTE[index % PATCH_PALETTE.length];
}
