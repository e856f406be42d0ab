// End-to-end scripted console session against the real service:
// jog -> pick a view and go -> grade -> launch sweep -> estop -> reset ->
// questionnaire -> shutdown, then replay the session log through
// `cli report` and check the same commands, grades and answers appear.

import { ChildProcess, execFile, spawn } from "node:child_process";
import { readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { TelemetryMessage } from "../src/protocol.js";
import { ConsoleSession } from "../src/session.js";
import { tcpChannel } from "../src/nodeChannel.js";

const PORT = 18999;
const REPO = resolve(__dirname, "..", "..");
const SCENARIO = join(REPO, "src", "ifind_sim", "data", "scenarios",
                      "v2-surface-follow.yaml");
const LOG_PATH = join(tmpdir(), `console-session-${process.pid}.jsonl`);
const ANSWERS = [4, 3, 2, 4, 4, 4, 3];

let server: ChildProcess;
let session: ConsoleSession;
const frames: TelemetryMessage[] = [];
const outcomes: any[] = [];

function waitFor<T>(probe: () => T | undefined, timeoutMs: number,
                    what: string): Promise<T> {
  const start = Date.now();
  return new Promise((resolvePromise, rejectPromise) => {
    const timer = setInterval(() => {
      const value = probe();
      if (value !== undefined) {
        clearInterval(timer);
        resolvePromise(value);
      } else if (Date.now() - start > timeoutMs) {
        clearInterval(timer);
        rejectPromise(new Error(`timeout waiting for ${what}`));
      }
    }, 25);
  });
}

function outcomeOf(id: string, timeoutMs = 15_000): Promise<any> {
  return waitFor(() => outcomes.find((o) => o.id === id), timeoutMs,
                 `outcome of ${id}`);
}

function runCli(args: string[]): Promise<string> {
  return new Promise((resolvePromise, rejectPromise) => {
    execFile("python3", ["-m", "ifind_sim.cli", ...args],
             { cwd: REPO, timeout: 60_000 },
             (error, stdout, stderr) => {
               if (error) rejectPromise(new Error(stderr || String(error)));
               else resolvePromise(stdout);
             });
  });
}

beforeAll(async () => {
  server = spawn("python3",
                 ["-m", "ifind_sim.cli", "serve", "--scenario", SCENARIO,
                  "--port", String(PORT), "--max-ticks", "1000000",
                  "--log-out", LOG_PATH],
                 { cwd: REPO, stdio: ["ignore", "pipe", "pipe"] });
  let channel;
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      channel = await tcpChannel("127.0.0.1", PORT);
      break;
    } catch {
      if (Date.now() > deadline) throw new Error("service never came up");
      await new Promise((r) => setTimeout(r, 300));
    }
  }
  session = new ConsoleSession(channel);
  session.onFrame((f) => frames.push(f));
  session.onOutcome((o) => outcomes.push(o));
  await waitFor(() => session.hello ?? undefined, 15_000, "hello");
}, 60_000);

afterAll(async () => {
  if (session) {
    try {
      session.shutdown();
      await new Promise((r) => setTimeout(r, 1000));
      session.close();
    } catch {
      // already closed
    }
  }
  if (server && server.exitCode === null) {
    await new Promise((r) => setTimeout(r, 1500));
    if (server.exitCode === null) server.kill();
  }
});

describe("scripted console session", () => {
  it("drives the whole workflow and the log replays it", async () => {
    expect(session.hello?.preset).toBe("ifind-v2");
    expect(Object.keys(session.hello!.questions)).toHaveLength(7);

    // 1. Jog one wrist joint.
    const jog = session.jog("J4", 0.1);
    expect((await outcomeOf(jog)).ok).toBe(true);

    // 2. Pick a standard view, go there, wait for arrival, grade it.
    const go = session.goToView("aorta at coeliac axis");
    expect((await outcomeOf(go)).ok).toBe(true);
    await waitFor(
      () => {
        const f = frames[frames.length - 1];
        return f && f.mode === "IDLE" && f.tick > 10 ? true : undefined;
      },
      60_000, "move_to arrival");
    const grade = session.gradeView("aorta at coeliac axis");
    expect((await outcomeOf(grade)).ok).toBe(true);

    // 3. Launch the scenario sweep and let it run briefly.
    const sweep = session.launchSweep("midline");
    expect((await outcomeOf(sweep)).ok).toBe(true);
    await waitFor(
      () => (frames[frames.length - 1]?.mode === "FOLLOWING"
        ? true : undefined),
      30_000, "sweep to start");

    // 4. Emergency stop: reflected in telemetry within one frame.
    const stop = session.estop();
    const stopOutcome = await outcomeOf(stop);
    expect(stopOutcome.ok).toBe(true);
    const estopFrame = await waitFor(
      () => frames.find((f) => f.safety.state === "ESTOP"),
      10_000, "ESTOP frame");
    expect(estopFrame.tick).toBeLessThanOrEqual(stopOutcome.tick + 1);

    // Motion is rejected while faulted.
    const blocked = session.jog("J4", 0.1);
    const blockedOutcome = await outcomeOf(blocked);
    expect(blockedOutcome.ok).toBe(false);
    expect(blockedOutcome.error).toBe("RejectedInFault");

    // 5. Reset, then submit the questionnaire.
    const reset = session.reset();
    expect((await outcomeOf(reset)).ok).toBe(true);
    const questionnaire = session.submitQuestionnaire("console", "v2",
                                                      ANSWERS);
    expect((await outcomeOf(questionnaire)).ok).toBe(true);

    // 6. Shut down; the service writes the session log.
    session.shutdown();
    await waitFor(() => (server.exitCode !== null ? true : undefined),
                  30_000, "server exit");

    // Replay: raw log carries the same commands and answers...
    const lines = readFileSync(LOG_PATH, "utf8").trim().split("\n")
      .map((line) => JSON.parse(line));
    const commands = lines.filter((e) => e.kind === "command")
      .map((e) => e.payload.kind);
    for (const kind of ["jog", "move_to", "grade", "follow_sweep", "estop",
                        "reset", "questionnaire"]) {
      expect(commands).toContain(kind);
    }
    const questionnaireEvents = lines.filter(
      (e) => e.kind === "questionnaire");
    expect(questionnaireEvents).toHaveLength(1);
    expect(questionnaireEvents[0].payload.answers).toEqual(ANSWERS);
    const gradeEvents = lines.filter((e) => e.kind === "grade");
    expect(gradeEvents.length).toBeGreaterThanOrEqual(1);
    expect(gradeEvents[0].payload.view).toBe("aorta at coeliac axis");

    // ...and `cli report` reproduces the grades and Q1..Q7 answers.
    const report = JSON.parse(
      await runCli(["report", "--log", LOG_PATH, "--format", "records"]));
    const robot = report.grades.robot;
    expect(robot.count).toBeGreaterThanOrEqual(1);
    const q = report.questionnaire.v2;
    ANSWERS.forEach((answer, i) => {
      const stats = q[`Q${i + 1}`];
      expect(stats.median).toBe(answer);
      expect(stats.counts[answer]).toBe(1);
    });
  }, 180_000);
});
