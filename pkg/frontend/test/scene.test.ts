import { describe, expect, it } from "vitest";

import {
  ARM_COLORS,
  Camera,
  WITNESS_COLOR,
  buildScene,
  project,
  safetyBanner,
} from "../src/scene.js";
import { makeFrame, makeHello } from "./helpers.js";

const camera: Camera = {
  azimuth: 0, elevation: 0, scale: 100, centerX: 400, centerY: 300,
};

describe("projection", () => {
  it("maps world x to screen x at zero azimuth", () => {
    expect(project(camera, [0.5, 0, 0])).toEqual([450, 300]);
  });

  it("maps world z up the screen at high elevation", () => {
    const high: Camera = { ...camera, elevation: Math.PI / 2 };
    const [, y] = project(high, [0, 0, 0.5]);
    expect(y).toBeCloseTo(250);
  });
});

describe("buildScene", () => {
  it("draws both arms at their frame origins", () => {
    const primitives = buildScene(makeHello(), makeFrame(), camera);
    const segments = primitives.filter(
      (p) => p.kind === "segment" && (p.color === ARM_COLORS[0]
                                      || p.color === ARM_COLORS[1]));
    // Two arms x two links each in the fixture.
    expect(segments).toHaveLength(4);
  });

  it("estop frame produces a dominant banner", () => {
    const frame = makeFrame({
      mode: "FAULT",
      safety: { state: "ESTOP", cause: "operator emergency stop" },
    });
    const primitives = buildScene(makeHello(), frame, camera);
    const banner = primitives.find((p) => p.kind === "banner") as any;
    expect(banner).toBeDefined();
    expect(banner.text).toContain("ESTOP");
    expect(banner.color).toBe("#c21616");
    expect(safetyBanner(makeFrame())).toBeNull();
  });

  it("highlights the witness pair when clearance is low", () => {
    const frame = makeFrame({ clearance: 0.015,
                              clearance_witness: [1, 1] });
    const primitives = buildScene(makeHello(), frame, camera);
    const witness = primitives.filter(
      (p) => p.kind === "segment" && p.color === WITNESS_COLOR);
    expect(witness).toHaveLength(2); // one link per arm
    const clearText = primitives.find(
      (p) => p.kind === "text" && p.text.startsWith("clearance")) as any;
    expect(clearText.text).toBe("clearance 15 mm");
    expect(clearText.color).toBe(WITNESS_COLOR);
  });

  it("keeps arm colors when clearance is comfortable", () => {
    const frame = makeFrame({ clearance: 0.12,
                              clearance_witness: [1, 1] });
    const primitives = buildScene(makeHello(), frame, camera);
    expect(primitives.some(
      (p) => p.kind === "segment" && p.color === WITNESS_COLOR)).toBe(false);
  });

  it("shows force gauges per arm", () => {
    const frame = makeFrame({
      forces: [
        { normal: 10, lateral: [0, 0], sensed: [10, 0, 0] },
        { normal: 17, lateral: [0, 0], sensed: [17, 0, 0] },
      ],
    });
    const bars = buildScene(makeHello(), frame, camera)
      .filter((p) => p.kind === "bar") as any[];
    expect(bars).toHaveLength(2);
    expect(bars[0].fraction).toBeCloseTo(0.5);
    expect(bars[1].color).toBe("#c21616"); // above the 15 N soft limit
  });
});
