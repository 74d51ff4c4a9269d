// Geometry used by the renderer, testable without a canvas.

import { test } from "node:test";
import assert from "node:assert/strict";

import { nearestBlockPoint } from "../src/render.js";
import { WorldFrame } from "../src/protocol.js";

function frameWith(blocks: WorldFrame["blocks"]): WorldFrame {
    return { t: 0, ego: [0, 0, 0, 0], tether: true, blocks,
             contact: true, recording: false };
}

test("nearest point on an axis-aligned block", () => {
    const f = frameWith([[5, 1, 0, 0.5, 0.4]]);
    const [px, py] = nearestBlockPoint(f, 5, 3);  // straight above
    assert.ok(Math.abs(px - 5) < 1e-9);
    assert.ok(Math.abs(py - 1.4) < 1e-9);         // top face
    const [lx, ly] = nearestBlockPoint(f, 3, 1);  // straight left
    assert.ok(Math.abs(lx - 4.5) < 1e-9);
    assert.ok(Math.abs(ly - 1) < 1e-9);
});

test("nearest point respects block rotation", () => {
    // 45-degree square: the corner points up; a probe straight above lands
    // on the rotated surface, closer than the axis-aligned top would be.
    const f = frameWith([[5, 1, Math.PI / 4, 0.5, 0.5]]);
    const [px, py] = nearestBlockPoint(f, 5, 3);
    assert.ok(Math.abs(px - 5) < 1e-6);
    const cornerY = 1 + 0.5 * Math.SQRT2;
    assert.ok(Math.abs(py - cornerY) < 1e-6, `py=${py}`);
});

test("picks the closer of several blocks", () => {
    const f = frameWith([[2, 1, 0, 0.4, 0.4], [8, 1, 0, 0.4, 0.4]]);
    const [px] = nearestBlockPoint(f, 7, 1);
    assert.ok(px > 6);  // right block
});
