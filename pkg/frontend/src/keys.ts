// Keyboard wiring: arrow keys steer, 'g' grabs, 'r' toggles recording,
// 's' saves. Key events are translated to edge-triggered session calls.

import { ClientSession } from "./session.js";
import { KeyState } from "./protocol.js";

const ARROWS: Record<string, keyof KeyState> = {
    ArrowLeft: "left",
    ArrowRight: "right",
    ArrowUp: "up",
    ArrowDown: "down",
};

export const KEY_HELP =
    "arrows: move   g: grab   r: record on/off   s: save";

export function bindKeys(session: ClientSession, target: {
    addEventListener(type: string, cb: (ev: KeyboardEvent) => void): void;
}): void {
    target.addEventListener("keydown", (ev: KeyboardEvent) => {
        if (ev.repeat) return;
        const arrow = ARROWS[ev.key];
        if (arrow !== undefined) {
            session.setKey(arrow, true);
            ev.preventDefault?.();
        } else if (ev.key === "g") {
            session.setGrab(true);
        } else if (ev.key === "r") {
            session.toggleRecording();
        } else if (ev.key === "s") {
            session.command("save");
        }
    });
    target.addEventListener("keyup", (ev: KeyboardEvent) => {
        const arrow = ARROWS[ev.key];
        if (arrow !== undefined) {
            session.setKey(arrow, false);
        } else if (ev.key === "g") {
            session.setGrab(false);
        }
    });
}
