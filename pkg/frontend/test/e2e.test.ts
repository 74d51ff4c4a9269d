// End-to-end: a scripted headless session against a real simulation server.
// Steers with synthetic key events using streamed frames, grabs the block,
// records, saves, then verifies the written log through the python tooling.
// Runs a short session by default; E2E=1 runs the full 60 s protocol.

import { test } from "node:test";
import assert from "node:assert/strict";
import { spawn, spawnSync } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import WebSocket from "ws";

import { ClientSession, SocketLike } from "../src/session.js";
import { WorldFrame } from "../src/protocol.js";

const PORT = 8977;
const SECONDS = process.env.E2E === "1" ? 60 : 12;
const PYTHON = process.env.PYTHON ?? "python3";

function wsFactory(url: string): SocketLike {
    return new WebSocket(url) as unknown as SocketLike;
}

async function waitForServer(timeoutMs: number): Promise<void> {
    const deadline = Date.now() + timeoutMs;
    while (Date.now() < deadline) {
        const ok = await new Promise<boolean>((resolve) => {
            const probe = new WebSocket(`ws://127.0.0.1:${PORT}`);
            probe.on("open", () => { probe.close(); resolve(true); });
            probe.on("error", () => resolve(false));
        });
        if (ok) return;
        await new Promise((r) => setTimeout(r, 250));
    }
    throw new Error("teleop server did not come up");
}

function steer(session: ClientSession, frame: WorldFrame,
               phase: { mode: string }): void {
    const [ex, ey] = frame.ego;
    const [bx, by, , , hh] = frame.blocks[0];
    const gx = bx;
    const gy = by + hh + 0.3;
    if (phase.mode === "approach") {
        session.setKey("left", gx < ex - 0.1);
        session.setKey("right", gx > ex + 0.1);
        session.setKey("up", gy > ey + 0.1);
        session.setKey("down", gy < ey - 0.1);
        session.setGrab(Math.hypot(gx - ex, gy - ey) < 1.0);
        if (frame.tether) phase.mode = "lift";
    } else if (phase.mode === "lift") {
        session.setKey("down", false);
        session.setKey("left", false);
        session.setKey("right", false);
        session.setKey("up", true);
        session.setGrab(true);
        if (ey > 3.0) phase.mode = "drop";
    } else if (phase.mode === "drop") {
        session.setGrab(false);
        session.setKey("up", false);
        session.setKey("down", true);
        if (ey < 1.0) phase.mode = "approach";
    }
}

test("recorded teleop session round-trips through the python tooling",
     { timeout: (SECONDS + 60) * 1000 }, async () => {
    const workdir = mkdtempSync(join(tmpdir(), "teleop-e2e-"));
    const out = join(workdir, "human.playlog");
    const server = spawn(PYTHON, [
        "-m", "play2d.cli", "teleop-serve",
        "--host", "127.0.0.1", "--port", String(PORT), "--seed", "4",
    ], { stdio: ["ignore", "pipe", "pipe"] });
    try {
        await waitForServer(15000);
        const session = new ClientSession(
            `ws://127.0.0.1:${PORT}`, wsFactory);
        let saved = false;
        session.onAck = (ack) => { if (ack.ack === "save") saved = true; };
        session.connect();
        await new Promise<void>((resolve) => {
            session.onStatus = (s) => { if (s === "open") resolve(); };
            if (session.status === "open") resolve();
        });
        session.command("record_start");
        const phase = { mode: "approach" };
        session.onFrame = (frame) => steer(session, frame, phase);
        await new Promise((r) => setTimeout(r, SECONDS * 1000));
        session.onFrame = null;
        session.command("record_stop");
        session.command("save", out);
        const deadline = Date.now() + 10_000;
        while (!saved && Date.now() < deadline) {
            await new Promise((r) => setTimeout(r, 100));
        }
        assert.ok(saved, "server acknowledged the save");

        // Render-rate bound against the local server (default rate 20 Hz).
        const rate = session.medianFrameRate();
        assert.ok(rate >= 15, `median frame rate ${rate.toFixed(1)} < 15 Hz`);
        assert.ok(session.framesReceived >= SECONDS * 15);

        session.close();

        // The written file is a standard play log: validate + segment it.
        const probe = spawnSync(PYTHON, ["-c", `
import sys
import numpy as np
from play2d import playlog
from play2d.segment import SmoothingConfig, segment_episode
log = playlog.load(sys.argv[1])
report = playlog.validate(log)
assert report.ok, report.message
assert log.n_episodes >= 1
grabbed = any(ep.actions[:, 2].max() >= 1.0 for ep in log.episodes)
n_int = sum(len(segment_episode(ep.contact, SmoothingConfig()).interactions)
            for ep in log.episodes)
print(f"episodes={log.n_episodes} steps={log.n_steps} "
      f"grabbed={grabbed} interactions={n_int}")
assert not grabbed or n_int >= 1
`, out], { encoding: "utf-8" });
        assert.equal(probe.status, 0, probe.stderr);
        assert.match(probe.stdout, /interactions=[1-9]/);
    } finally {
        server.kill("SIGINT");
    }
});
