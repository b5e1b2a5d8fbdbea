// Canvas playback of indexed-color frames. All candidate players share one
// clock so the grid of cards loops in sync.

export interface IndexedAnimation {
  palette: number[][];
  height: number;
  width: number;
  frames: number[][];
}

const SCALE = 6;

export class FramePlayer {
  readonly canvas: HTMLCanvasElement;
  private ctx: CanvasRenderingContext2D | null;
  private rgb: Uint8ClampedArray<ArrayBuffer>[] = [];
  frameIndex = 0;

  constructor(private anim: IndexedAnimation) {
    this.canvas = document.createElement("canvas");
    this.canvas.width = anim.width * SCALE;
    this.canvas.height = anim.height * SCALE;
    this.canvas.className = "petri-player";
    // jsdom has no 2D context; playback state still advances without drawing
    this.ctx = this.canvas.getContext ? this.canvas.getContext("2d") : null;
    this.prerender();
  }

  get frameCount(): number {
    return this.anim.frames.length;
  }

  private prerender(): void {
    const { palette, frames, width, height } = this.anim;
    for (const frame of frames) {
      const buf = new Uint8ClampedArray(new ArrayBuffer(width * height * 4));
      for (let i = 0; i < frame.length; i++) {
        const rgb = palette[frame[i]] ?? [0, 0, 0];
        buf[i * 4] = rgb[0];
        buf[i * 4 + 1] = rgb[1];
        buf[i * 4 + 2] = rgb[2];
        buf[i * 4 + 3] = 255;
      }
      this.rgb.push(buf);
    }
  }

  /** Show frame at a shared clock tick; loops over the animation. */
  renderTick(tick: number): void {
    if (this.rgb.length === 0) return;
    this.frameIndex = tick % this.rgb.length;
    if (!this.ctx) return;
    const { width, height } = this.anim;
    const img = new ImageData(this.rgb[this.frameIndex], width, height);
    const off = typeof createImageBitmap === "undefined";
    // nearest-neighbor upscale via drawImage of a temp canvas
    const tmp = document.createElement("canvas");
    tmp.width = width;
    tmp.height = height;
    const tctx = tmp.getContext("2d");
    if (!tctx) return;
    tctx.putImageData(img, 0, 0);
    this.ctx.imageSmoothingEnabled = false;
    this.ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    this.ctx.drawImage(tmp, 0, 0, this.canvas.width, this.canvas.height);
    void off;
  }
}

export class SharedClock {
  private tick = 0;
  private timer: ReturnType<typeof setInterval> | null = null;
  private players = new Set<FramePlayer>();

  constructor(private intervalMs = 120) {}

  add(player: FramePlayer): void {
    this.players.add(player);
    player.renderTick(this.tick);
  }

  clear(): void {
    this.players.clear();
  }

  start(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => {
      this.tick += 1;
      for (const p of this.players) p.renderTick(this.tick);
    }, this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
