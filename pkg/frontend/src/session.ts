// ConsoleSession: the console's connection state machine. It owns the
// request-id counter, correlates acks/errors, tracks the latest
// telemetry frame, and surfaces gap markers instead of hiding them.
// Everything the console does to the simulation goes through here as a
// wire command; nothing mutates simulation state locally.

import {
  CommandMessage,
  HelloMessage,
  LineChannel,
  ServerMessage,
  TelemetryMessage,
  decodeServerMessage,
  encodeCommand,
  viewTargetPose,
} from "./protocol.js";

export interface PendingRequest {
  id: string;
  kind: string;
  sentAt: number;
}

export interface CommandOutcome {
  id: string;
  kind: string;
  ok: boolean;
  error?: string;
  tick?: number;
}

type Listener<T> = (value: T) => void;

export class ConsoleSession {
  hello: HelloMessage | null = null;
  frame: TelemetryMessage | null = null;
  gaps = 0;
  connected = false;
  readonly pending = new Map<string, PendingRequest>();

  private counter = 0;
  private frameListeners: Listener<TelemetryMessage>[] = [];
  private helloListeners: Listener<HelloMessage>[] = [];
  private outcomeListeners: Listener<CommandOutcome>[] = [];
  private gapListeners: Listener<number>[] = [];
  private closeListeners: (() => void)[] = [];

  constructor(private channel: LineChannel) {
    channel.onLine((line) => this.handleLine(line));
    channel.onClose(() => {
      this.connected = false;
      this.closeListeners.forEach((fn) => fn());
    });
    this.connected = true;
  }

  onFrame(fn: Listener<TelemetryMessage>): void {
    this.frameListeners.push(fn);
  }

  onHello(fn: Listener<HelloMessage>): void {
    this.helloListeners.push(fn);
  }

  onOutcome(fn: Listener<CommandOutcome>): void {
    this.outcomeListeners.push(fn);
  }

  onGap(fn: Listener<number>): void {
    this.gapListeners.push(fn);
  }

  onClose(fn: () => void): void {
    this.closeListeners.push(fn);
  }

  get faulted(): boolean {
    return this.frame?.mode === "FAULT";
  }

  private handleLine(line: string): void {
    const msg = decodeServerMessage(line);
    if (!msg) return;
    this.handleMessage(msg);
  }

  private handleMessage(msg: ServerMessage): void {
    switch (msg.type) {
      case "hello":
        this.hello = msg;
        this.helloListeners.forEach((fn) => fn(msg));
        break;
      case "telemetry":
        this.frame = msg;
        this.frameListeners.forEach((fn) => fn(msg));
        break;
      case "gap":
        this.gaps += 1;
        this.gapListeners.forEach((fn) => fn(this.gaps));
        break;
      case "ack":
      case "error": {
        const request = this.pending.get(msg.request_id);
        if (!request) return;
        this.pending.delete(msg.request_id);
        const outcome: CommandOutcome =
          msg.type === "ack"
            ? { id: request.id, kind: request.kind, ok: true,
                tick: msg.tick }
            : { id: request.id, kind: request.kind, ok: false,
                error: msg.error };
        this.outcomeListeners.forEach((fn) => fn(outcome));
        break;
      }
    }
  }

  /** Every command gets a fresh id; returns it for correlation. */
  submit(kind: string, params: Record<string, unknown> = {}): string {
    this.counter += 1;
    const id = `c${this.counter}`;
    const command: CommandMessage = { request_id: id, kind, params };
    this.pending.set(id, { id, kind, sentAt: Date.now() });
    this.channel.send(encodeCommand(command));
    return id;
  }

  jog(joint: string, delta: number): string {
    return this.submit("jog", { joint, delta });
  }

  /** target_picker: "go" sends move_to with the view's target pose. */
  goToView(name: string): string {
    if (!this.hello) throw new Error("not connected");
    const view = this.hello.views[name];
    if (!view) throw new Error(`unknown view ${name}`);
    const pose = viewTargetPose(view);
    return this.submit("move_to", {
      position: pose.position,
      quaternion: pose.quaternion,
    });
  }

  gradeView(name: string): string {
    return this.submit("grade", { view: name });
  }

  launchSweep(path: string): string {
    return this.submit("follow_sweep", { path });
  }

  setIndentation(value: number): string {
    return this.submit("set_indentation", { value });
  }

  home(): string {
    return this.submit("home");
  }

  estop(): string {
    return this.submit("estop");
  }

  reset(): string {
    return this.submit("reset");
  }

  submitQuestionnaire(volunteerId: string, robotVersion: string,
                      answers: number[]): string {
    if (answers.length !== 7) {
      throw new Error("questionnaire needs exactly seven answers");
    }
    if (answers.some((a) => !Number.isInteger(a) || a < 0 || a > 4)) {
      throw new Error("answers must be integers 0..4");
    }
    return this.submit("questionnaire", {
      volunteer_id: volunteerId,
      robot_version: robotVersion,
      answers,
    });
  }

  shutdown(): string {
    return this.submit("shutdown");
  }

  close(): void {
    this.channel.close();
  }
}

/** Browser transport: WebSocket carrying one JSON line per message. */
export function webSocketChannel(url: string): LineChannel {
  const ws = new WebSocket(url);
  let lineHandler: (line: string) => void = () => undefined;
  let closeHandler: () => void = () => undefined;
  const backlog: string[] = [];
  let open = false;
  ws.onopen = () => {
    open = true;
    backlog.splice(0).forEach((line) => ws.send(line));
  };
  ws.onmessage = (event) => {
    for (const line of String(event.data).split("\n")) {
      if (line.trim()) lineHandler(line);
    }
  };
  ws.onclose = () => closeHandler();
  ws.onerror = () => closeHandler();
  return {
    send: (line) => {
      if (open) ws.send(line);
      else backlog.push(line);
    },
    onLine: (fn) => {
      lineHandler = fn;
    },
    onClose: (fn) => {
      closeHandler = fn;
    },
    close: () => ws.close(),
  };
}
