// Replay mode: parse a saved play log and re-render it at its original rate.
// The file format is the simulator's own: an 8-byte magic, a little-endian
// u32 manifest length, a JSON manifest, then packed float32 step records
// (robot state ++ object state ++ action) plus one contact byte per step.

import { WorldFrame } from "./protocol.js";

const MAGIC = "PLAYLOG1";

export interface ReplayLog {
    dt: number;
    robotDim: number;
    objectDim: number;
    actionDim: number;
    episodes: WorldFrame[][];
}

export function parsePlaylog(buffer: ArrayBuffer): ReplayLog {
    const bytes = new Uint8Array(buffer);
    const magic = new TextDecoder().decode(bytes.subarray(0, 8));
    if (magic !== MAGIC) {
        throw new Error(`not a play log (magic ${JSON.stringify(magic)})`);
    }
    const view = new DataView(buffer);
    const manifestLen = view.getUint32(8, true);
    const manifest = JSON.parse(new TextDecoder().decode(
        bytes.subarray(12, 12 + manifestLen)));
    const robotDim: number = manifest.robot_dim;
    const objectDim: number = manifest.object_dim;
    const actionDim: number = manifest.action_dim;
    const floats = robotDim + objectDim + actionDim;
    const recordSize = 4 * floats + 1;
    const nBlocks = Math.floor(objectDim / 10);

    let offset = 12 + manifestLen;
    const episodes: WorldFrame[][] = [];
    for (const length of manifest.episode_lengths as number[]) {
        const frames: WorldFrame[] = [];
        for (let t = 0; t < length; t++) {
            const base = offset + t * recordSize;
            const f = new Float32Array(floats);
            for (let i = 0; i < floats; i++) {
                f[i] = view.getFloat32(base + 4 * i, true);
            }
            const contact = bytes[base + 4 * floats] !== 0;
            const blocks: [number, number, number, number, number][] = [];
            for (let b = 0; b < nBlocks; b++) {
                const o = robotDim + 10 * b;
                blocks.push([f[o], f[o + 1], Math.atan2(f[o + 2], f[o + 3]),
                             f[o + 7], f[o + 8]]);
            }
            frames.push({
                t,
                ego: [f[0], f[1], f[2], f[3]],
                tether: f[4] > 0.5,
                blocks,
                contact,
                recording: false,
            });
        }
        episodes.push(frames);
        offset += length * recordSize;
    }
    return { dt: manifest.dt, robotDim, objectDim, actionDim, episodes };
}

export class ReplayPlayer {
    private log: ReplayLog;
    private episode = 0;
    private index = 0;
    private timer: ReturnType<typeof setInterval> | null = null;
    onFrame: ((frame: WorldFrame, episode: number) => void) | null = null;

    constructor(log: ReplayLog) {
        this.log = log;
    }

    /** Play all episodes back to back at the log's own control rate. */
    start(): void {
        this.stop();
        this.timer = setInterval(() => this.tick(), this.log.dt * 1000);
    }

    stop(): void {
        if (this.timer !== null) clearInterval(this.timer);
        this.timer = null;
    }

    get playing(): boolean {
        return this.timer !== null;
    }

    tick(): void {
        if (this.episode >= this.log.episodes.length) {
            this.stop();
            return;
        }
        const frames = this.log.episodes[this.episode];
        this.onFrame?.(frames[this.index], this.episode);
        this.index += 1;
        if (this.index >= frames.length) {
            this.index = 0;
            this.episode += 1;
        }
    }
}
