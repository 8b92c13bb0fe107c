import { describe, expect, it } from "vitest";

import { parseMapText } from "../src/maptext.js";

const TEXT = "3 2 0.5 0.0 0.0 0.0\n##.\n#..\n";

describe("parseMapText", () => {
  it("skips the header and flips rows so row 0 is the bottom", () => {
    const parsed = parseMapText(TEXT);
    expect(parsed.width).toBe(3);
    expect(parsed.height).toBe(2);
    // bottom row is the last body line
    expect(parsed.occupied[0]).toEqual([true, false, false]);
    expect(parsed.occupied[1]).toEqual([true, true, false]);
  });

  it("tolerates a trailing newline", () => {
    expect(parseMapText(TEXT + "\n").height).toBe(2);
  });

  it("rejects ragged rows", () => {
    expect(() => parseMapText("h\n##\n#\n")).toThrow(/row length/);
  });

  it("rejects text without rows", () => {
    expect(() => parseMapText("header only\n")).toThrow(/header/);
  });
});
