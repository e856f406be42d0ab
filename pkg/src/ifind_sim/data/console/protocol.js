// Message types and codec for the simulation service line protocol.
// Every message is one JSON object per line; the WebSocket transport
// carries the same lines, one per socket message.
export function encodeCommand(command) {
    return JSON.stringify(command) + "\n";
}
export function decodeServerMessage(line) {
    const text = line.trim();
    if (!text)
        return null;
    let parsed;
    try {
        parsed = JSON.parse(text);
    }
    catch {
        return null;
    }
    const msg = parsed;
    switch (msg.type) {
        case "hello":
        case "telemetry":
        case "ack":
        case "error":
        case "gap":
            return parsed;
        default:
            return null;
    }
}
/** Splits a byte stream into newline-delimited records, keeping remainders. */
export class LineSplitter {
    constructor() {
        this.buffer = "";
    }
    push(chunk) {
        this.buffer += chunk;
        const parts = this.buffer.split("\n");
        this.buffer = parts.pop() ?? "";
        return parts.filter((p) => p.trim().length > 0);
    }
}
function cross(a, b) {
    return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0]];
}
function dot(a, b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
function normalize(a) {
    const n = Math.hypot(a[0], a[1], a[2]);
    return [a[0] / n, a[1] / n, a[2] / n];
}
/**
 * Probe pose for a view target: tip pressed `indentation` below the
 * surface point, probe axis (local +z) anti-parallel to the normal,
 * deterministic tangent frame. Matches the service's rule so "go to
 * view" sends exactly the view's target pose.
 */
export function viewTargetPose(view) {
    const n = normalize(view.normal);
    const z = [-n[0], -n[1], -n[2]];
    let ref = [1, 0, 0];
    if (Math.abs(dot(n, ref)) > 0.9)
        ref = [0, 1, 0];
    const t1 = normalize([
        ref[0] - dot(ref, n) * n[0],
        ref[1] - dot(ref, n) * n[1],
        ref[2] - dot(ref, n) * n[2],
    ]);
    const y = cross(z, t1);
    // Column-major rotation [t1 y z] -> quaternion (w, x, y, z).
    const m00 = t1[0], m01 = y[0], m02 = z[0];
    const m10 = t1[1], m11 = y[1], m12 = z[1];
    const m20 = t1[2], m21 = y[2], m22 = z[2];
    const trace = m00 + m11 + m22;
    let w, x, yq, zq;
    if (trace > 0) {
        const s = Math.sqrt(trace + 1) * 2;
        w = s / 4;
        x = (m21 - m12) / s;
        yq = (m02 - m20) / s;
        zq = (m10 - m01) / s;
    }
    else if (m00 > m11 && m00 > m22) {
        const s = Math.sqrt(1 + m00 - m11 - m22) * 2;
        w = (m21 - m12) / s;
        x = s / 4;
        yq = (m01 + m10) / s;
        zq = (m02 + m20) / s;
    }
    else if (m11 > m22) {
        const s = Math.sqrt(1 + m11 - m00 - m22) * 2;
        w = (m02 - m20) / s;
        x = (m01 + m10) / s;
        yq = s / 4;
        zq = (m12 + m21) / s;
    }
    else {
        const s = Math.sqrt(1 + m22 - m00 - m11) * 2;
        w = (m10 - m01) / s;
        x = (m02 + m20) / s;
        yq = (m12 + m21) / s;
        zq = s / 4;
    }
    const norm = Math.hypot(w, x, yq, zq);
    let quaternion = [w / norm, x / norm, yq / norm, zq / norm];
    if (quaternion[0] < 0) {
        quaternion = [-quaternion[0], -quaternion[1], -quaternion[2],
            -quaternion[3]];
    }
    const position = [
        view.surface_point[0] - view.indentation * n[0],
        view.surface_point[1] - view.indentation * n[1],
        view.surface_point[2] - view.indentation * n[2],
    ];
    return { position, quaternion };
}
