/** Single-page editing session: images, painted mask, undo, history, submit.
 *
 * The mask raster always matches the background dimensions, history is
 * append-only, and at most one compose job is in flight. Submission is
 * refused client-side whenever the server would reject it for a reason the
 * client can check locally (missing image, empty mask).
 */

import {
  BusyError,
  ComposeClient,
  ComposePayload,
  FieldError,
  NetworkError,
} from "./api.js";
import { bytesToBase64, maskToPng } from "./png.js";
import {
  MaskRaster,
  cloneRaster,
  createRaster,
  fillRectangle,
  isEmpty,
  stampCircle,
  stampSegment,
} from "./raster.js";

export const MIN_IMAGE_SIDE = 8; // the service replicate-pads anything this size or larger
export const MASK_LEVELS = [1, 2, 3, 4] as const;
const UNDO_LIMIT = 64;

export interface LoadedImage {
  name: string;
  width: number;
  height: number;
  pngBase64: string;
}

export interface HistoryEntry {
  mask: MaskRaster;
  maskLevel: number;
  image: string; // base64 PNG result
  jobId: string;
}

export type SessionError =
  | { kind: "field"; field: string; message: string }
  | { kind: "busy"; message: string; retryAfterSeconds: number }
  | { kind: "toast"; message: string };

export interface SampleSettings {
  steps?: number;
  cfg_scale?: number;
  seed?: number;
}

export class Session {
  background: LoadedImage | null = null;
  object: LoadedImage | null = null;
  mask: MaskRaster | null = null;
  maskLevel: number = 2;
  lastJobId: string | null = null;
  lastError: SessionError | null = null;
  inFlight = false;

  private readonly entries: HistoryEntry[] = [];
  private undoStack: MaskRaster[] = [];

  get history(): readonly HistoryEntry[] {
    return this.entries;
  }

  /** Loading a background resets the mask raster to the new dimensions. */
  setBackground(image: LoadedImage): void {
    checkImage(image);
    this.background = image;
    this.mask = createRaster(image.width, image.height);
    this.undoStack = [];
    this.lastError = null;
  }

  setObject(image: LoadedImage): void {
    checkImage(image);
    this.object = image;
    this.lastError = null;
  }

  setMaskLevel(level: number): void {
    if (!MASK_LEVELS.includes(level as (typeof MASK_LEVELS)[number])) {
      throw new RangeError(`mask level must be 1..4, got ${level}`);
    }
    this.maskLevel = level;
  }

  private paintable(): MaskRaster {
    if (!this.mask) throw new Error("load a background before painting");
    return this.mask;
  }

  /** Snapshot the raster so the whole following stroke undoes as one step. */
  beginStroke(): void {
    const mask = this.paintable();
    this.undoStack.push(cloneRaster(mask));
    if (this.undoStack.length > UNDO_LIMIT) this.undoStack.shift();
  }

  applyBrush(x: number, y: number, radius: number, erase = false): void {
    stampCircle(this.paintable(), x, y, radius, erase ? 0 : 1);
  }

  applyBrushSegment(
    x0: number, y0: number, x1: number, y1: number, radius: number, erase = false,
  ): void {
    stampSegment(this.paintable(), x0, y0, x1, y1, radius, erase ? 0 : 1);
  }

  applyRectangle(xa: number, ya: number, xb: number, yb: number): void {
    fillRectangle(this.paintable(), xa, ya, xb, yb, 1);
  }

  /** Restore the raster exactly as it was before the last stroke. */
  undo(): boolean {
    const previous = this.undoStack.pop();
    if (!previous) return false;
    this.mask = previous;
    return true;
  }

  maskIsEmpty(): boolean {
    return this.mask === null || isEmpty(this.mask);
  }

  canSubmit(): boolean {
    return this.background !== null && this.object !== null
      && !this.maskIsEmpty() && !this.inFlight;
  }

  buildPayload(settings: SampleSettings = {}): ComposePayload {
    if (!this.background || !this.object || !this.mask) {
      throw new Error("session is not ready to compose");
    }
    return {
      background: this.background.pngBase64,
      object: this.object.pngBase64,
      mask: bytesToBase64(maskToPng(this.mask)),
      mask_level: this.maskLevel,
      ...settings,
    };
  }

  /** Compose the current state; resolves to the new history entry, or null
   * when the submission was refused or the server turned it down. */
  async submit(client: ComposeClient, settings: SampleSettings = {}): Promise<HistoryEntry | null> {
    if (!this.canSubmit()) {
      if (this.inFlight) {
        this.lastError = { kind: "toast", message: "a compose job is already running" };
      } else if (this.background === null || this.object === null) {
        this.lastError = { kind: "toast", message: "load both images first" };
      } else {
        this.lastError = { kind: "field", field: "mask", message: "paint a mask before composing" };
      }
      return null;
    }
    this.inFlight = true;
    this.lastError = null;
    try {
      const result = await client.compose(this.buildPayload(settings));
      const entry: HistoryEntry = {
        mask: cloneRaster(this.mask as MaskRaster),
        maskLevel: this.maskLevel,
        image: result.image,
        jobId: result.jobId,
      };
      this.entries.push(entry);
      this.lastJobId = result.jobId;
      return entry;
    } catch (error) {
      this.lastError = describeError(error);
      return null;
    } finally {
      this.inFlight = false;
    }
  }
}

function checkImage(image: LoadedImage): void {
  if (image.width < MIN_IMAGE_SIDE || image.height < MIN_IMAGE_SIDE) {
    throw new RangeError(
      `image must be at least ${MIN_IMAGE_SIDE}px on each side, `
      + `got ${image.width}x${image.height}`);
  }
}

function describeError(error: unknown): SessionError {
  if (error instanceof FieldError) {
    return { kind: "field", field: error.field, message: error.message };
  }
  if (error instanceof BusyError) {
    return {
      kind: "busy",
      retryAfterSeconds: error.retryAfterSeconds,
      message: `server is busy, retry in ${error.retryAfterSeconds}s`,
    };
  }
  if (error instanceof NetworkError) {
    return { kind: "toast", message: "could not reach the server, check the connection and retry" };
  }
  const message = error instanceof Error ? error.message : String(error);
  return { kind: "toast", message };
}
