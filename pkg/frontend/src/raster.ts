/** Binary mask raster and the painting primitives the canvas tools call. */

export interface MaskRaster {
  readonly width: number;
  readonly height: number;
  /** Row-major 0/1 values. */
  readonly data: Uint8Array;
}

export function createRaster(width: number, height: number): MaskRaster {
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new RangeError(`raster dimensions must be positive integers, got ${width}x${height}`);
  }
  return { width, height, data: new Uint8Array(width * height) };
}

export function cloneRaster(raster: MaskRaster): MaskRaster {
  return { width: raster.width, height: raster.height, data: raster.data.slice() };
}

export function rastersEqual(a: MaskRaster, b: MaskRaster): boolean {
  if (a.width !== b.width || a.height !== b.height) return false;
  for (let i = 0; i < a.data.length; i++) {
    if (a.data[i] !== b.data[i]) return false;
  }
  return true;
}

export function isEmpty(raster: MaskRaster): boolean {
  return !raster.data.some((v) => v !== 0);
}

export function filledArea(raster: MaskRaster): number {
  let n = 0;
  for (let i = 0; i < raster.data.length; i++) n += raster.data[i];
  return n;
}

/** Stamp a filled circle; value 1 paints, 0 erases. Coordinates may fall outside. */
export function stampCircle(
  raster: MaskRaster, cx: number, cy: number, radius: number, value: 0 | 1,
): void {
  if (radius < 0) throw new RangeError(`radius must be >= 0, got ${radius}`);
  const r2 = radius * radius;
  const x0 = Math.max(0, Math.floor(cx - radius));
  const x1 = Math.min(raster.width - 1, Math.ceil(cx + radius));
  const y0 = Math.max(0, Math.floor(cy - radius));
  const y1 = Math.min(raster.height - 1, Math.ceil(cy + radius));
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      const dx = x - cx;
      const dy = y - cy;
      if (dx * dx + dy * dy <= r2) raster.data[y * raster.width + x] = value;
    }
  }
}

/** Stamp circles along a segment so fast pointer moves leave no gaps. */
export function stampSegment(
  raster: MaskRaster,
  x0: number, y0: number, x1: number, y1: number,
  radius: number, value: 0 | 1,
): void {
  const steps = Math.max(1, Math.ceil(Math.hypot(x1 - x0, y1 - y0) / Math.max(1, radius / 2)));
  for (let i = 0; i <= steps; i++) {
    const t = i / steps;
    stampCircle(raster, x0 + (x1 - x0) * t, y0 + (y1 - y0) * t, radius, value);
  }
}

/** Fill the axis-aligned box spanned by two drag corners (inclusive, any order). */
export function fillRectangle(
  raster: MaskRaster,
  xa: number, ya: number, xb: number, yb: number,
  value: 0 | 1 = 1,
): void {
  const x0 = Math.max(0, Math.floor(Math.min(xa, xb)));
  const x1 = Math.min(raster.width - 1, Math.floor(Math.max(xa, xb)));
  const y0 = Math.max(0, Math.floor(Math.min(ya, yb)));
  const y1 = Math.min(raster.height - 1, Math.floor(Math.max(ya, yb)));
  for (let y = y0; y <= y1; y++) {
    raster.data.fill(value, y * raster.width + x0, y * raster.width + x1 + 1);
  }
}
