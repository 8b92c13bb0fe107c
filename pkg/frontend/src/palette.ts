/** Perceptually ordered color scale for likelihood/gain fields. */

export type Rgb = [number, number, number];

// Anchor stops of the viridis scale; intermediate values interpolate
// linearly. Value 1.0 must hit the top stop exactly.
const STOPS: Array<[number, Rgb]> = [
  [0.0, [68, 1, 84]],
  [0.25, [59, 82, 139]],
  [0.5, [33, 145, 140]],
  [0.75, [94, 201, 98]],
  [1.0, [253, 231, 37]],
];

export const TOP_COLOR: Rgb = STOPS[STOPS.length - 1][1];

export function palette(value: number): Rgb {
  const t = Math.min(1, Math.max(0, value));
  for (let i = 1; i < STOPS.length; i += 1) {
    const [t1, c1] = STOPS[i];
    if (t <= t1) {
      const [t0, c0] = STOPS[i - 1];
      const f = (t - t0) / (t1 - t0);
      return [
        Math.round(c0[0] + f * (c1[0] - c0[0])),
        Math.round(c0[1] + f * (c1[1] - c0[1])),
        Math.round(c0[2] + f * (c1[2] - c0[2])),
      ];
    }
  }
  return TOP_COLOR;
}

export function cssColor(rgb: Rgb, alpha = 1): string {
  return `rgba(${rgb[0]},${rgb[1]},${rgb[2]},${alpha})`;
}
