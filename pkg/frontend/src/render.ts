// Canvas rendering: a handful of primitives, no engine. The arena is mapped
// to the canvas with a uniform scale and a y-flip (world y grows upward).

import { WorldFrame } from "./protocol.js";

export interface ArenaSize {
    width: number;
    height: number;
}

export const DEFAULT_ARENA: ArenaSize = { width: 10, height: 6 };
export const EGO_RADIUS = 0.25;

export class Renderer {
    private ctx: CanvasRenderingContext2D;
    private canvas: HTMLCanvasElement;
    arena: ArenaSize;

    constructor(canvas: HTMLCanvasElement, arena: ArenaSize = DEFAULT_ARENA) {
        this.canvas = canvas;
        const ctx = canvas.getContext("2d");
        if (ctx === null) throw new Error("canvas 2d context unavailable");
        this.ctx = ctx;
        this.arena = arena;
    }

    private scale(): number {
        return Math.min(this.canvas.width / this.arena.width,
                        this.canvas.height / this.arena.height);
    }

    private toPx(x: number, y: number): [number, number] {
        const s = this.scale();
        return [x * s, this.canvas.height - y * s];
    }

    draw(frame: WorldFrame): void {
        const ctx = this.ctx;
        const s = this.scale();
        ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);

        // Arena walls.
        ctx.fillStyle = "#f4f1ea";
        const [ax, ay] = this.toPx(0, this.arena.height);
        ctx.fillRect(ax, ay, this.arena.width * s, this.arena.height * s);
        ctx.strokeStyle = "#444";
        ctx.lineWidth = 2;
        ctx.strokeRect(ax, ay, this.arena.width * s, this.arena.height * s);

        // Blocks as oriented rectangles.
        for (const [bx, by, theta, hw, hh] of frame.blocks) {
            const [px, py] = this.toPx(bx, by);
            ctx.save();
            ctx.translate(px, py);
            ctx.rotate(-theta); // y-flip inverts the rotation direction
            ctx.fillStyle = "#4a7dbd";
            ctx.fillRect(-hw * s, -hh * s, 2 * hw * s, 2 * hh * s);
            ctx.strokeStyle = "#1d3f66";
            ctx.strokeRect(-hw * s, -hh * s, 2 * hw * s, 2 * hh * s);
            ctx.restore();
        }

        // Tether line toward the nearest block surface point.
        const [ex, ey] = frame.ego;
        if (frame.tether && frame.blocks.length > 0) {
            const target = nearestBlockPoint(frame, ex, ey);
            const [tx, ty] = this.toPx(target[0], target[1]);
            const [gx, gy] = this.toPx(ex, ey);
            ctx.strokeStyle = "#b8860b";
            ctx.lineWidth = 3;
            ctx.beginPath();
            ctx.moveTo(gx, gy);
            ctx.lineTo(tx, ty);
            ctx.stroke();
        }

        // Ego agent (red disc).
        const [gx, gy] = this.toPx(ex, ey);
        ctx.fillStyle = "#c0392b";
        ctx.beginPath();
        ctx.arc(gx, gy, EGO_RADIUS * s, 0, 2 * Math.PI);
        ctx.fill();

        // Indicators.
        ctx.font = "14px sans-serif";
        if (frame.contact) {
            ctx.fillStyle = "#b8860b";
            ctx.fillText("contact", 8, 18);
        }
        if (frame.recording) {
            ctx.fillStyle = "#c0392b";
            ctx.beginPath();
            ctx.arc(this.canvas.width - 16, 16, 6, 0, 2 * Math.PI);
            ctx.fill();
            ctx.fillText("REC", this.canvas.width - 50, 21);
        }
    }

    drawBanner(text: string): void {
        const ctx = this.ctx;
        ctx.fillStyle = "rgba(40, 40, 40, 0.85)";
        ctx.fillRect(0, 0, this.canvas.width, 34);
        ctx.fillStyle = "#fff";
        ctx.font = "15px sans-serif";
        ctx.fillText(text, 10, 22);
    }
}

export function nearestBlockPoint(frame: WorldFrame, x: number, y: number,
                                  ): [number, number] {
    let best: [number, number] = [frame.blocks[0][0], frame.blocks[0][1]];
    let bestDist = Infinity;
    for (const [bx, by, theta, hw, hh] of frame.blocks) {
        // Closest point on the oriented box to (x, y).
        const c = Math.cos(-theta);
        const sn = Math.sin(-theta);
        const lx = c * (x - bx) - sn * (y - by);
        const ly = sn * (x - bx) + c * (y - by);
        const cx = Math.max(-hw, Math.min(hw, lx));
        const cy = Math.max(-hh, Math.min(hh, ly));
        const wc = Math.cos(theta);
        const ws = Math.sin(theta);
        const px = bx + wc * cx - ws * cy;
        const py = by + ws * cx + wc * cy;
        const d = (px - x) ** 2 + (py - y) ** 2;
        if (d < bestDist) {
            bestDist = d;
            best = [px, py];
        }
    }
    return best;
}
