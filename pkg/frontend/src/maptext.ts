/** Parse the map text block from the hello payload.
 *
 * The text is a header line followed by one `.`/`#` line per grid row,
 * written top row first (row 0 printed last, so the text reads +y up).
 * The result is row-major with row 0 at the bottom, matching world frames.
 */

export interface ParsedMap {
  width: number;
  height: number;
  occupied: boolean[][]; // [row][col], row 0 = lowest y
}

export function parseMapText(text: string): ParsedMap {
  const lines = text.split("\n").filter((line) => line.trim() !== "");
  if (lines.length < 2) {
    throw new Error("map text needs a header and at least one row");
  }
  const body = lines.slice(1);
  const height = body.length;
  const width = body[0].length;
  const occupied: boolean[][] = [];
  for (let row = 0; row < height; row += 1) {
    const line = body[height - 1 - row];
    if (line.length !== width) {
      throw new Error(`map row length ${line.length} != ${width}`);
    }
    occupied.push(Array.from(line, (ch) => ch === "#"));
  }
  return { width, height, occupied };
}
