import { HelloMessage, LineChannel, TelemetryMessage } from "../src/protocol.js";

/** In-memory channel: the test plays the server side. */
export class FakeChannel implements LineChannel {
  sent: string[] = [];
  private lineHandler: (line: string) => void = () => undefined;
  private closeHandler: () => void = () => undefined;

  send(line: string): void {
    this.sent.push(line);
  }

  onLine(handler: (line: string) => void): void {
    this.lineHandler = handler;
  }

  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }

  close(): void {
    this.closeHandler();
  }

  serverSays(message: object): void {
    this.lineHandler(JSON.stringify(message));
  }

  lastCommand(): { request_id: string; kind: string; params: any } {
    return JSON.parse(this.sent[this.sent.length - 1]);
  }
}

export function makeHello(overrides: Partial<HelloMessage> = {}):
    HelloMessage {
  return {
    type: "hello",
    protocol: 1,
    preset: "ifind-v3",
    dt: 0.02,
    joints: [
      { id: "J0", kind: "prismatic", limits: [-0.35, 0.35], home: 0 },
      { id: "left.J1", kind: "revolute", limits: [-3.14, 3.14], home: 0 },
      { id: "right.J1", kind: "revolute", limits: [-3.14, 3.14], home: 0 },
    ],
    views: {
      "aorta at coeliac axis": {
        surface_point: [0.05, 0.01, 0.097],
        normal: [0.1, 0.02, 0.99],
        indentation: 0.004,
      },
    },
    questions: {
      Q1: "q1", Q2: "q2", Q3: "q3", Q4: "q4", Q5: "q5", Q6: "q6", Q7: "q7",
    },
    sweeps: ["lanes"],
    capsule_radii: [0.04, 0.04, 0.04, 0.03, 0.03, 0.03, 0.03, 0.025],
    mesh: {
      vertices: [[0, 0, 0.1], [0.1, 0, 0], [0, 0.1, 0]],
      triangles: [[0, 1, 2]],
    },
    ...overrides,
  };
}

export function makeFrame(overrides: Partial<TelemetryMessage> = {}):
    TelemetryMessage {
  return {
    type: "telemetry",
    tick: 1,
    mode: "IDLE",
    safety: { state: "NOMINAL", cause: "" },
    joints: [0, 0, 0],
    tips: [
      { position: [-0.1, 0, 0.2], quaternion: [0, 0, 1, 0] },
      { position: [0.1, 0, 0.2], quaternion: [0, 0, 1, 0] },
    ],
    forces: [
      { normal: 0, lateral: [0, 0], sensed: [0, 0, 0] },
      { normal: 0, lateral: [0, 0], sensed: [0, 0, 0] },
    ],
    clearance: 0.2,
    clearance_witness: [7, 7],
    frames: [
      [[-0.2, -0.4, 0.3], [-0.15, -0.2, 0.35], [-0.1, 0, 0.2]],
      [[0.2, -0.4, 0.3], [0.15, -0.2, 0.35], [0.1, 0, 0.2]],
    ],
    ...overrides,
  };
}
