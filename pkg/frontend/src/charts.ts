/**
 * Dependency-free canvas strip charts.  Each chart draws one channel's rolling
 * window, optional horizontal bands (deadband, thresholds) and vertical
 * continuity-break markers after reconnects.
 */

import { SeriesPoint } from "./model.js";

export interface Band {
  lo: number;
  hi: number;
  color: string;
}

export interface Line {
  value: number;
  color: string;
  dash?: number[];
}

export class StripChart {
  private readonly ctx: CanvasRenderingContext2D;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly pick: (p: SeriesPoint) => number,
    private readonly color: string,
    private readonly label: string,
  ) {
    const ctx = canvas.getContext("2d");
    if (ctx === null) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
  }

  draw(points: SeriesPoint[], bands: Band[] = [], lines: Line[] = [], breaks: number[] = []): void {
    const { width: w, height: h } = this.canvas;
    const ctx = this.ctx;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = "#141a22";
    ctx.fillRect(0, 0, w, h);
    if (points.length === 0) return;

    const t0 = points[0].tick;
    const t1 = Math.max(points[points.length - 1].tick, t0 + 1);
    const values = points.map(this.pick);
    let lo = Math.min(...values, ...bands.map((b) => b.lo), ...lines.map((l) => l.value));
    let hi = Math.max(...values, ...bands.map((b) => b.hi), ...lines.map((l) => l.value));
    if (hi - lo < 1e-9) {
      lo -= 1;
      hi += 1;
    }
    const pad = 0.08 * (hi - lo);
    lo -= pad;
    hi += pad;
    const x = (tick: number) => ((tick - t0) / (t1 - t0)) * (w - 52) + 44;
    const y = (v: number) => h - 16 - ((v - lo) / (hi - lo)) * (h - 26);

    for (const band of bands) {
      ctx.fillStyle = band.color;
      ctx.fillRect(44, y(band.hi), w - 52, y(band.lo) - y(band.hi));
    }
    for (const line of lines) {
      ctx.strokeStyle = line.color;
      ctx.setLineDash(line.dash ?? [4, 3]);
      ctx.beginPath();
      ctx.moveTo(44, y(line.value));
      ctx.lineTo(w - 8, y(line.value));
      ctx.stroke();
      ctx.setLineDash([]);
    }
    for (const brk of breaks) {
      if (brk < t0 || brk > t1) continue;
      ctx.strokeStyle = "#888";
      ctx.setLineDash([2, 4]);
      ctx.beginPath();
      ctx.moveTo(x(brk), 4);
      ctx.lineTo(x(brk), h - 12);
      ctx.stroke();
      ctx.setLineDash([]);
    }

    ctx.strokeStyle = this.color;
    ctx.lineWidth = 1.4;
    ctx.beginPath();
    points.forEach((p, i) => {
      const px = x(p.tick);
      const py = y(this.pick(p));
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.stroke();
    ctx.lineWidth = 1;

    ctx.fillStyle = "#9aa7b8";
    ctx.font = "10px system-ui, sans-serif";
    ctx.fillText(this.label, 46, 11);
    ctx.fillText(hi.toFixed(1), 2, 12);
    ctx.fillText(lo.toFixed(1), 2, h - 4);
    const last = values[values.length - 1];
    ctx.fillStyle = this.color;
    ctx.fillText(last.toFixed(1), w - 42, 11);
  }
}
