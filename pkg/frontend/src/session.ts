// Connection and input state machine. The client owns no physics: every
// drawn frame comes from the server, so a dropped connection can never
// corrupt a recording. Input messages are edge-triggered: one message per
// key-state change, nothing per frame.

import {
    Command, IDLE_KEYS, InputMessage, KeyState, WorldFrame, isWorldFrame,
} from "./protocol.js";

export interface SocketLike {
    send(data: string): void;
    close(): void;
    onopen: ((ev?: unknown) => void) | null;
    onmessage: ((ev: { data: unknown }) => void) | null;
    onclose: ((ev?: unknown) => void) | null;
    onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export type ConnectionStatus = "connecting" | "open" | "closed";

const RECONNECT_BASE_MS = 250;
const RECONNECT_MAX_MS = 4000;
const RATE_WINDOW = 120;

export class ClientSession {
    status: ConnectionStatus = "connecting";
    lastFrame: WorldFrame | null = null;
    keys: KeyState = { ...IDLE_KEYS };
    grab = false;
    recording = false;
    framesReceived = 0;
    sentMessages: number = 0;

    onFrame: ((frame: WorldFrame) => void) | null = null;
    onStatus: ((status: ConnectionStatus) => void) | null = null;
    onAck: ((ack: Record<string, unknown>) => void) | null = null;

    private socket: SocketLike | null = null;
    private url: string;
    private makeSocket: SocketFactory;
    private retryDelay = RECONNECT_BASE_MS;
    private retryTimer: ReturnType<typeof setTimeout> | null = null;
    private stopped = false;
    private frameTimes: number[] = [];
    private now: () => number;

    constructor(url: string, makeSocket: SocketFactory,
                now: () => number = () => Date.now()) {
        this.url = url;
        this.makeSocket = makeSocket;
        this.now = now;
    }

    connect(): void {
        this.stopped = false;
        this.open();
    }

    private open(): void {
        this.setStatus("connecting");
        const sock = this.makeSocket(this.url);
        this.socket = sock;
        sock.onopen = () => {
            this.retryDelay = RECONNECT_BASE_MS;
            this.setStatus("open");
            // Server integrates key state; resend ours on (re)connect.
            this.sendInput();
        };
        sock.onmessage = (ev) => this.handleMessage(ev.data);
        sock.onerror = () => { /* close follows; reconnect handles it */ };
        sock.onclose = () => {
            this.socket = null;
            this.setStatus("closed");
            if (!this.stopped) {
                this.retryTimer = setTimeout(() => this.open(), this.retryDelay);
                this.retryDelay = Math.min(this.retryDelay * 2, RECONNECT_MAX_MS);
            }
        };
    }

    close(): void {
        this.stopped = true;
        if (this.retryTimer !== null) clearTimeout(this.retryTimer);
        this.socket?.close();
        this.socket = null;
    }

    private setStatus(status: ConnectionStatus): void {
        if (status !== this.status) {
            this.status = status;
            this.onStatus?.(status);
        }
    }

    private handleMessage(data: unknown): void {
        let parsed: unknown;
        try {
            parsed = JSON.parse(String(data));
        } catch {
            console.warn("teleop: dropping unparseable frame");
            return;
        }
        if (isWorldFrame(parsed)) {
            this.lastFrame = parsed;
            this.recording = parsed.recording;
            this.framesReceived += 1;
            this.frameTimes.push(this.now());
            if (this.frameTimes.length > RATE_WINDOW) this.frameTimes.shift();
            this.onFrame?.(parsed);
        } else if (typeof parsed === "object" && parsed !== null) {
            this.onAck?.(parsed as Record<string, unknown>);
        } else {
            console.warn("teleop: dropping malformed message");
        }
    }

    /** Median frames-per-second over the recent window. */
    medianFrameRate(): number {
        if (this.frameTimes.length < 3) return 0;
        const gaps: number[] = [];
        for (let i = 1; i < this.frameTimes.length; i++) {
            gaps.push(this.frameTimes[i] - this.frameTimes[i - 1]);
        }
        gaps.sort((a, b) => a - b);
        const mid = gaps[Math.floor(gaps.length / 2)];
        return mid > 0 ? 1000 / mid : 0;
    }

    /** Set one directional key; sends exactly one message per actual change. */
    setKey(name: keyof KeyState, pressed: boolean): void {
        if (this.keys[name] === pressed) return;
        this.keys[name] = pressed;
        this.sendInput();
    }

    setGrab(pressed: boolean): void {
        if (this.grab === pressed) return;
        this.grab = pressed;
        this.sendInput();
    }

    private sendInput(): void {
        const msg: InputMessage = { keys: { ...this.keys }, grab: this.grab };
        this.sendRaw(JSON.stringify(msg));
    }

    command(cmd: Command, path?: string): void {
        const msg: { cmd: Command; path?: string } = { cmd };
        if (path !== undefined) msg.path = path;
        this.sendRaw(JSON.stringify(msg));
    }

    toggleRecording(): void {
        this.command(this.recording ? "record_stop" : "record_start");
    }

    private sendRaw(data: string): void {
        if (this.socket !== null && this.status === "open") {
            this.socket.send(data);
            this.sentMessages += 1;
        }
    }
}
