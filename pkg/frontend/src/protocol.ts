// Wire protocol shared with the simulation server (text frames, JSON).

export interface WorldFrame {
    t: number;
    ego: [number, number, number, number]; // x, y, vx, vy
    tether: boolean;
    blocks: [number, number, number, number, number][]; // x, y, theta, w, h
    contact: boolean;
    recording: boolean;
}

export interface KeyState {
    left: boolean;
    right: boolean;
    up: boolean;
    down: boolean;
}

export interface InputMessage {
    keys: KeyState;
    grab: boolean;
}

export type Command = "record_start" | "record_stop" | "reset" | "save";

export interface CommandMessage {
    cmd: Command;
    path?: string;
}

export function isWorldFrame(msg: unknown): msg is WorldFrame {
    if (typeof msg !== "object" || msg === null) return false;
    const m = msg as Record<string, unknown>;
    return Array.isArray(m.ego) && m.ego.length === 4
        && Array.isArray(m.blocks)
        && typeof m.t === "number"
        && typeof m.tether === "boolean"
        && typeof m.contact === "boolean"
        && typeof m.recording === "boolean";
}

export const IDLE_KEYS: KeyState = {
    left: false, right: false, up: false, down: false,
};
