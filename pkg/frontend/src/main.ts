// Browser entry point. Live mode connects to the teleop server and wires the
// keyboard; ?replay=<url> instead renders a saved play log at its own rate.

import { ClientSession, SocketLike } from "./session.js";
import { Renderer } from "./render.js";
import { bindKeys, KEY_HELP } from "./keys.js";
import { ReplayPlayer, parsePlaylog } from "./replay.js";

const params = new URLSearchParams(window.location.search);
const canvas = document.getElementById("world") as HTMLCanvasElement;
const help = document.getElementById("help");
const renderer = new Renderer(canvas);
const replaySrc = params.get("replay");

if (replaySrc !== null) {
    if (help !== null) help.textContent = `replaying ${replaySrc}`;
    fetch(replaySrc)
        .then((res) => res.arrayBuffer())
        .then((buf) => {
            const player = new ReplayPlayer(parsePlaylog(buf));
            player.onFrame = (frame, episode) => {
                renderer.draw(frame);
                if (help !== null) {
                    help.textContent =
                        `replaying ${replaySrc} — episode ${episode}`;
                }
            };
            player.start();
        })
        .catch((err) => renderer.drawBanner(`replay failed: ${err}`));
} else {
    const url = params.get("server") ?? "ws://127.0.0.1:8765";
    if (help !== null) help.textContent = `${KEY_HELP}   server: ${url}`;
    const session = new ClientSession(
        url, (u) => new WebSocket(u) as unknown as SocketLike);

    let lastDrawn = -1;
    const loop = (): void => {
        const frame = session.lastFrame;
        if (frame !== null && frame.t !== lastDrawn) {
            renderer.draw(frame);
            lastDrawn = frame.t;
        }
        if (session.status !== "open") {
            renderer.drawBanner(
                session.status === "connecting"
                    ? "connecting…" : "connection lost — retrying");
        }
        requestAnimationFrame(loop);
    };

    bindKeys(session, window as unknown as {
        addEventListener(type: string, cb: (ev: KeyboardEvent) => void): void;
    });
    session.onAck = (ack) => {
        if (ack.ack === "save") {
            console.log(`saved ${ack.episodes} episodes to ${ack.path}`);
        }
    };
    session.connect();
    requestAnimationFrame(loop);
}
