import type { TracePoint } from './api.js';

/** The server rejects drawings shorter than this after timestamp collapsing. */
export const MIN_POINTS = 5;

export class EmptyDrawing extends Error {
  constructor(got: number) {
    super(`need at least ${MIN_POINTS} points, got ${got}`);
    this.name = 'EmptyDrawing';
  }
}

/**
 * Collects one digit's trajectory from pointer samples.
 *
 * Mirrors the server's ingestion rules so bad drawings fail locally:
 * timestamps must increase (a repeated timestamp is collapsed, a decreasing
 * one is dropped), and a finished drawing needs MIN_POINTS points.  A digit
 * may span several strokes; the pen-up gap simply leaves a hole in time.
 */
export class StrokeRecorder {
  private points: TracePoint[] = [];
  private down = false;

  get pointCount(): number {
    return this.points.length;
  }

  get drawing(): boolean {
    return this.down;
  }

  start(x: number, y: number, t: number): void {
    this.down = true;
    this.extend(x, y, t);
  }

  extend(x: number, y: number, t: number): void {
    if (!this.down) return;
    const last = this.points[this.points.length - 1];
    if (last && t <= last.t) return;
    this.points.push({ x, y, t });
  }

  lift(): void {
    this.down = false;
  }

  /** Return the collected trajectory and start over. */
  finish(): TracePoint[] {
    this.down = false;
    if (this.points.length < MIN_POINTS) throw new EmptyDrawing(this.points.length);
    const out = this.points;
    this.points = [];
    return out;
  }

  reset(): void {
    this.points = [];
    this.down = false;
  }
}
