// Node-only transport: the same line protocol over a raw TCP socket.
// Used by the integration test to script a console session without a
// browser; the browser uses the WebSocket adapter instead.

import * as net from "node:net";

import { LineChannel, LineSplitter } from "./protocol.js";

export function tcpChannel(host: string, port: number):
    Promise<LineChannel> {
  return new Promise((resolve, reject) => {
    const socket = net.createConnection({ host, port });
    const splitter = new LineSplitter();
    let lineHandler: (line: string) => void = () => undefined;
    let closeHandler: () => void = () => undefined;
    socket.setEncoding("utf8");
    socket.on("connect", () => {
      resolve({
        send: (line) => socket.write(line),
        onLine: (fn) => {
          lineHandler = fn;
        },
        onClose: (fn) => {
          closeHandler = fn;
        },
        close: () => socket.end(),
      });
    });
    socket.on("data", (chunk: string) => {
      for (const line of splitter.push(chunk)) lineHandler(line);
    });
    socket.on("error", (err) => reject(err));
    socket.on("close", () => closeHandler());
  });
}
