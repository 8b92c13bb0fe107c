import { describe, expect, it } from "vitest";

import { cssColor, palette, TOP_COLOR } from "../src/palette.js";

describe("palette", () => {
  it("hits the top color exactly at value 1", () => {
    expect(palette(1.0)).toEqual(TOP_COLOR);
    expect(palette(1.0)).toEqual([253, 231, 37]);
  });

  it("starts at the bottom color for value 0", () => {
    expect(palette(0.0)).toEqual([68, 1, 84]);
  });

  it("clamps out-of-range values", () => {
    expect(palette(-3)).toEqual(palette(0));
    expect(palette(7)).toEqual(palette(1));
  });

  it("interpolates between anchor stops", () => {
    const mid = palette(0.125);
    expect(mid).toEqual([
      Math.round((68 + 59) / 2),
      Math.round((1 + 82) / 2),
      Math.round((84 + 139) / 2),
    ]);
  });

  it("is brighter at higher values", () => {
    const lum = (rgb: number[]) => rgb[0] + rgb[1] + rgb[2];
    expect(lum(palette(0.9))).toBeGreaterThan(lum(palette(0.2)));
  });
});

describe("cssColor", () => {
  it("formats rgba strings", () => {
    expect(cssColor([253, 231, 37], 0.6)).toBe("rgba(253,231,37,0.6)");
    expect(cssColor([0, 0, 0])).toBe("rgba(0,0,0,1)");
  });
});
