// ConsoleSession: the console's connection state machine. It owns the
// request-id counter, correlates acks/errors, tracks the latest
// telemetry frame, and surfaces gap markers instead of hiding them.
// Everything the console does to the simulation goes through here as a
// wire command; nothing mutates simulation state locally.
import { decodeServerMessage, encodeCommand, viewTargetPose, } from "./protocol.js";
export class ConsoleSession {
    constructor(channel) {
        this.channel = channel;
        this.hello = null;
        this.frame = null;
        this.gaps = 0;
        this.connected = false;
        this.pending = new Map();
        this.counter = 0;
        this.frameListeners = [];
        this.helloListeners = [];
        this.outcomeListeners = [];
        this.gapListeners = [];
        this.closeListeners = [];
        channel.onLine((line) => this.handleLine(line));
        channel.onClose(() => {
            this.connected = false;
            this.closeListeners.forEach((fn) => fn());
        });
        this.connected = true;
    }
    onFrame(fn) {
        this.frameListeners.push(fn);
    }
    onHello(fn) {
        this.helloListeners.push(fn);
    }
    onOutcome(fn) {
        this.outcomeListeners.push(fn);
    }
    onGap(fn) {
        this.gapListeners.push(fn);
    }
    onClose(fn) {
        this.closeListeners.push(fn);
    }
    get faulted() {
        return this.frame?.mode === "FAULT";
    }
    handleLine(line) {
        const msg = decodeServerMessage(line);
        if (!msg)
            return;
        this.handleMessage(msg);
    }
    handleMessage(msg) {
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
                if (!request)
                    return;
                this.pending.delete(msg.request_id);
                const outcome = msg.type === "ack"
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
    submit(kind, params = {}) {
        this.counter += 1;
        const id = `c${this.counter}`;
        const command = { request_id: id, kind, params };
        this.pending.set(id, { id, kind, sentAt: Date.now() });
        this.channel.send(encodeCommand(command));
        return id;
    }
    jog(joint, delta) {
        return this.submit("jog", { joint, delta });
    }
    /** target_picker: "go" sends move_to with the view's target pose. */
    goToView(name) {
        if (!this.hello)
            throw new Error("not connected");
        const view = this.hello.views[name];
        if (!view)
            throw new Error(`unknown view ${name}`);
        const pose = viewTargetPose(view);
        return this.submit("move_to", {
            position: pose.position,
            quaternion: pose.quaternion,
        });
    }
    gradeView(name) {
        return this.submit("grade", { view: name });
    }
    launchSweep(path) {
        return this.submit("follow_sweep", { path });
    }
    setIndentation(value) {
        return this.submit("set_indentation", { value });
    }
    home() {
        return this.submit("home");
    }
    estop() {
        return this.submit("estop");
    }
    reset() {
        return this.submit("reset");
    }
    submitQuestionnaire(volunteerId, robotVersion, answers) {
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
    shutdown() {
        return this.submit("shutdown");
    }
    close() {
        this.channel.close();
    }
}
/** Browser transport: WebSocket carrying one JSON line per message. */
export function webSocketChannel(url) {
    const ws = new WebSocket(url);
    let lineHandler = () => undefined;
    let closeHandler = () => undefined;
    const backlog = [];
    let open = false;
    ws.onopen = () => {
        open = true;
        backlog.splice(0).forEach((line) => ws.send(line));
    };
    ws.onmessage = (event) => {
        for (const line of String(event.data).split("\n")) {
            if (line.trim())
                lineHandler(line);
        }
    };
    ws.onclose = () => closeHandler();
    ws.onerror = () => closeHandler();
    return {
        send: (line) => {
            if (open)
                ws.send(line);
            else
                backlog.push(line);
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
