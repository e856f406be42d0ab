import { describe, expect, it } from "vitest";

import {
  LineSplitter,
  decodeServerMessage,
  encodeCommand,
  viewTargetPose,
} from "../src/protocol.js";

describe("codec", () => {
  it("encodes one JSON object per line", () => {
    const line = encodeCommand({ request_id: "c1", kind: "jog",
                                 params: { joint: "J4", delta: 0.1 } });
    expect(line.endsWith("\n")).toBe(true);
    const parsed = JSON.parse(line);
    expect(parsed.kind).toBe("jog");
    expect(parsed.params.delta).toBeCloseTo(0.1);
  });

  it("decodes known server messages and rejects junk", () => {
    expect(decodeServerMessage('{"type":"gap"}')).toEqual({ type: "gap" });
    expect(decodeServerMessage('{"type":"ack","request_id":"x","tick":4}'))
      .toMatchObject({ type: "ack", tick: 4 });
    expect(decodeServerMessage("not json")).toBeNull();
    expect(decodeServerMessage('{"type":"mystery"}')).toBeNull();
    expect(decodeServerMessage("")).toBeNull();
  });

  it("splits byte chunks into lines across boundaries", () => {
    const splitter = new LineSplitter();
    expect(splitter.push('{"a":1}\n{"b"')).toEqual(['{"a":1}']);
    expect(splitter.push(':2}\n\n{"c":3}\n')).toEqual(['{"b":2}',
                                                       '{"c":3}']);
    expect(splitter.push("tail")).toEqual([]);
    expect(splitter.push("\n")).toEqual(["tail"]);
  });
});

describe("viewTargetPose", () => {
  it("points the probe axis against the normal", () => {
    const pose = viewTargetPose({
      surface_point: [0, 0, 0.1],
      normal: [0, 0, 1],
      indentation: 0.004,
    });
    expect(pose.position[2]).toBeCloseTo(0.096, 12);
    // quaternion (0,0,1,0) is the 180-degree flip: +z maps to -z.
    const [w, x, y, z] = pose.quaternion;
    const zAxis = [
      2 * (x * z + w * y),
      2 * (y * z - w * x),
      1 - 2 * (x * x + y * y),
    ];
    expect(zAxis[2]).toBeCloseTo(-1, 9);
  });

  it("keeps the quaternion unit for tilted normals", () => {
    const pose = viewTargetPose({
      surface_point: [0.05, 0.01, 0.095],
      normal: [0.3, 0.1, 0.9492],
      indentation: 0,
    });
    const n = Math.hypot(...pose.quaternion);
    expect(n).toBeCloseTo(1, 9);
    const [w, x, y, z] = pose.quaternion;
    const zAxis = [
      2 * (x * z + w * y),
      2 * (y * z - w * x),
      1 - 2 * (x * x + y * y),
    ];
    const normal = [0.3, 0.1, 0.9492];
    const len = Math.hypot(...normal);
    const dot = zAxis[0] * normal[0] / len + zAxis[1] * normal[1] / len
      + zAxis[2] * normal[2] / len;
    expect(dot).toBeCloseTo(-1, 6);
  });
});
