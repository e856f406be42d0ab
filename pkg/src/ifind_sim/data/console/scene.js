// Scene construction: telemetry frame -> drawable primitives. The
// simulator's truth is joint frames and capsules, so the scene is
// segments and wireframe, not CAD. Kept canvas-free so the geometry is
// unit-testable; draw() at the bottom is the only DOM-touching part.
export const ARM_COLORS = ["#3da5ff", "#ffb13d"];
export const WITNESS_COLOR = "#ff2d2d";
const MESH_COLOR = "rgba(120, 220, 160, 0.25)";
export function project(camera, p) {
    const ca = Math.cos(camera.azimuth);
    const sa = Math.sin(camera.azimuth);
    const ce = Math.cos(camera.elevation);
    const se = Math.sin(camera.elevation);
    // Rotate about z by azimuth, then tilt: orthographic projection.
    const x1 = ca * p[0] + sa * p[1];
    const y1 = -sa * p[0] + ca * p[1];
    const y2 = ce * y1 + se * p[2];
    return [camera.centerX + x1 * camera.scale,
        camera.centerY - y2 * camera.scale];
}
export function safetyBanner(frame) {
    const state = frame.safety.state;
    if (state === "NOMINAL")
        return null;
    const color = state === "FORCE_LIMIT" ? "#b98900" : "#c21616";
    const cause = frame.safety.cause ? ` — ${frame.safety.cause}` : "";
    return { kind: "banner", text: `${state}${cause}`, color };
}
export function buildScene(hello, frame, camera) {
    const primitives = [];
    // Surface mesh wireframe (every third triangle keeps it light).
    const { vertices, triangles } = hello.mesh;
    for (let t = 0; t < triangles.length; t += 3) {
        const [i, j, k] = triangles[t];
        const a = project(camera, vertices[i]);
        const b = project(camera, vertices[j]);
        const c = project(camera, vertices[k]);
        primitives.push({ kind: "segment", from: a, to: b, width: 1, color: MESH_COLOR }, { kind: "segment", from: b, to: c, width: 1, color: MESH_COLOR }, { kind: "segment", from: c, to: a, width: 1, color: MESH_COLOR });
    }
    // Arms: consecutive joint-frame origins as capsule-ish thick segments.
    const radii = hello.capsule_radii;
    frame.frames.forEach((armFrames, arm) => {
        for (let i = 0; i + 1 < armFrames.length; i++) {
            const witness = frame.clearance_witness;
            const isWitness = witness !== null &&
                ((arm === 0 && witness[0] === i) || (arm === 1 && witness[1] === i)) &&
                frame.clearance !== null &&
                frame.clearance < 0.03;
            const radius = radii ? radii[Math.min(i, radii.length - 1)] : 0.02;
            primitives.push({
                kind: "segment",
                from: project(camera, armFrames[i]),
                to: project(camera, armFrames[i + 1]),
                width: Math.max(2, radius * 2 * camera.scale),
                color: isWitness ? WITNESS_COLOR : ARM_COLORS[arm % 2],
            });
        }
    });
    // Probe tips.
    frame.tips.forEach((tip, arm) => {
        const [x, y] = project(camera, tip.position);
        primitives.push({
            kind: "text",
            text: arm === 0 ? "L" : "R",
            x,
            y: y - 8,
            color: ARM_COLORS[arm % 2],
            size: 12,
        });
    });
    // Force gauges: one bar per arm, full scale 20 N.
    frame.forces.forEach((force, arm) => {
        primitives.push({
            kind: "bar",
            x: 12,
            y: 16 + arm * 26,
            widthPx: 140,
            heightPx: 14,
            fraction: Math.min(1, force.normal / 20.0),
            color: force.normal > 15 ? "#c21616" : ARM_COLORS[arm % 2],
            label: `F${arm === 0 ? "L" : "R"} ${force.normal.toFixed(1)} N`,
        });
    });
    // Clearance readout for dual rigs.
    if (frame.clearance !== null) {
        primitives.push({
            kind: "text",
            text: `clearance ${(frame.clearance * 1000).toFixed(0)} mm`,
            x: 12,
            y: 78,
            color: frame.clearance < 0.02 ? WITNESS_COLOR : "#cfd8dc",
            size: 13,
        });
    }
    const banner = safetyBanner(frame);
    if (banner)
        primitives.push(banner);
    return primitives;
}
export function draw(ctx, width, height, primitives) {
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#10161c";
    ctx.fillRect(0, 0, width, height);
    for (const p of primitives) {
        if (p.kind === "segment") {
            ctx.strokeStyle = p.color;
            ctx.lineWidth = p.width;
            ctx.lineCap = "round";
            ctx.beginPath();
            ctx.moveTo(p.from[0], p.from[1]);
            ctx.lineTo(p.to[0], p.to[1]);
            ctx.stroke();
        }
        else if (p.kind === "text") {
            ctx.fillStyle = p.color;
            ctx.font = `${p.size}px system-ui, sans-serif`;
            ctx.fillText(p.text, p.x, p.y);
        }
        else if (p.kind === "bar") {
            ctx.strokeStyle = "#4a5561";
            ctx.strokeRect(p.x, p.y, p.widthPx, p.heightPx);
            ctx.fillStyle = p.color;
            ctx.fillRect(p.x, p.y, p.widthPx * p.fraction, p.heightPx);
            ctx.fillStyle = "#cfd8dc";
            ctx.font = "11px system-ui, sans-serif";
            ctx.fillText(p.label, p.x + p.widthPx + 8, p.y + p.heightPx - 3);
        }
        else if (p.kind === "banner") {
            ctx.fillStyle = p.color;
            ctx.fillRect(0, 0, width, 36);
            ctx.fillStyle = "#ffffff";
            ctx.font = "bold 16px system-ui, sans-serif";
            ctx.fillText(p.text, 12, 24);
        }
    }
}
