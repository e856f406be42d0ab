// Browser entry point: connect to the service WebSocket (same host,
// same port as this page), then wire the scene canvas and controls.

import { buildControls } from "./controls.js";
import { Camera, buildScene, draw } from "./scene.js";
import { ConsoleSession, webSocketChannel } from "./session.js";

function connect(): void {
  const url = `ws://${location.host}/ws`;
  const session = new ConsoleSession(webSocketChannel(url));
  const canvas = document.getElementById("scene") as HTMLCanvasElement;
  const controlsRoot = document.getElementById("controls") as HTMLElement;
  const banner = document.getElementById("connection") as HTMLElement;
  const ctx = canvas.getContext("2d")!;

  const camera: Camera = {
    azimuth: 0.6,
    elevation: 0.5,
    scale: 420,
    centerX: canvas.width / 2,
    centerY: canvas.height / 2 + 80,
  };

  let dragging = false;
  let last: [number, number] = [0, 0];
  canvas.onmousedown = (e) => {
    dragging = true;
    last = [e.clientX, e.clientY];
  };
  window.onmouseup = () => (dragging = false);
  window.onmousemove = (e) => {
    if (!dragging) return;
    camera.azimuth += (e.clientX - last[0]) * 0.01;
    camera.elevation = Math.min(
      1.5, Math.max(-0.2, camera.elevation + (e.clientY - last[1]) * 0.01));
    last = [e.clientX, e.clientY];
  };
  canvas.onwheel = (e) => {
    e.preventDefault();
    camera.scale *= e.deltaY < 0 ? 1.1 : 0.9;
  };

  session.onHello((hello) => {
    banner.textContent = `connected: ${hello.preset}`;
    banner.className = "connection ok";
    buildControls(controlsRoot, session, hello);
  });

  session.onFrame((frame) => {
    if (!session.hello) return;
    draw(ctx, canvas.width, canvas.height,
         buildScene(session.hello, frame, camera));
    const info = document.getElementById("tick-info")!;
    info.textContent =
      `tick ${frame.tick} · ${frame.mode} · ${frame.safety.state}`;
  });

  session.onClose(() => {
    banner.textContent = "connection lost — reconnecting…";
    banner.className = "connection lost";
    setTimeout(connect, 1500);
  });
}

connect();
