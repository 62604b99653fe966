import { StrokeRecorder } from './capture.js';

/**
 * Binds a StrokeRecorder to a canvas: pointer events feed the recorder and
 * leave ink on screen.  Timestamps come from the events themselves so the
 * trace keeps real pen dynamics, not repaint timing.
 */
export class DigitPad {
  private ctx: CanvasRenderingContext2D;
  private last: { x: number; y: number } | null = null;

  constructor(
    private canvas: HTMLCanvasElement,
    readonly recorder: StrokeRecorder,
  ) {
    const ctx = canvas.getContext('2d');
    if (!ctx) throw new Error('2D context not supported');
    this.ctx = ctx;
    this.resize();
    ctx.lineCap = 'round';
    ctx.lineJoin = 'round';
    ctx.lineWidth = 3;
    ctx.strokeStyle = '#1a3a5c';
    canvas.addEventListener('pointerdown', this.onDown);
    canvas.addEventListener('pointermove', this.onMove);
    canvas.addEventListener('pointerup', this.onUp);
    canvas.addEventListener('pointerleave', this.onUp);
  }

  private resize(): void {
    const ratio = Math.max(window.devicePixelRatio || 1, 1);
    this.canvas.width = this.canvas.offsetWidth * ratio;
    this.canvas.height = this.canvas.offsetHeight * ratio;
    this.ctx.scale(ratio, ratio);
  }

  private pos(event: PointerEvent): { x: number; y: number } {
    const rect = this.canvas.getBoundingClientRect();
    return { x: event.clientX - rect.left, y: event.clientY - rect.top };
  }

  private onDown = (event: PointerEvent): void => {
    event.preventDefault();
    this.canvas.setPointerCapture(event.pointerId);
    const { x, y } = this.pos(event);
    this.recorder.start(x, y, event.timeStamp);
    this.last = { x, y };
  };

  private onMove = (event: PointerEvent): void => {
    if (!this.recorder.drawing || !this.last) return;
    event.preventDefault();
    const { x, y } = this.pos(event);
    this.recorder.extend(x, y, event.timeStamp);
    this.ctx.beginPath();
    this.ctx.moveTo(this.last.x, this.last.y);
    this.ctx.lineTo(x, y);
    this.ctx.stroke();
    this.last = { x, y };
  };

  private onUp = (): void => {
    this.recorder.lift();
    this.last = null;
  };

  clear(): void {
    this.recorder.reset();
    this.ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    this.last = null;
  }
}
