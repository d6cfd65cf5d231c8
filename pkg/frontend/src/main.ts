/**
 * Browser entry point: connects to the bridge, renders the scene graph
 * onto a canvas, and turns pointer/keyboard/button input into client
 * messages. Server host/port come from the URL query (?host=..&port=..).
 */

import { DEFAULT_INPUT, Gesture, inputToCommand } from "./input.js";
import { buildScene, Camera, DEFAULT_CAMERA, SceneNode, ViewToggles } from "./scene.js";
import { SimConnection } from "./net.js";

const params = new URLSearchParams(window.location.search);
const host = params.get("host") ?? window.location.hostname ?? "127.0.0.1";
const port = params.get("port") ?? "8700";

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const banner = document.getElementById("banner")!;

const conn = new SimConnection();
conn.connect(`ws://${host}:${port}/sim`);

const input = { ...DEFAULT_INPUT };
const toggles: ViewToggles = { showVirtualArm: true, showFilteredTarget: true };
const camera: Camera = { ...DEFAULT_CAMERA };

function sendGesture(gesture: Gesture | null): void {
  input.connected = conn.connected;
  const msg = inputToCommand(gesture, input);
  if (msg && !conn.send(msg)) {
    banner.textContent = "not connected - input dropped";
  }
}

// pointer drag: left button steers the effector, right button orbits
let dragging = false;
let orbiting = false;
let last: [number, number] = [0, 0];
canvas.addEventListener("pointerdown", (ev) => {
  last = [ev.clientX, ev.clientY];
  if (ev.button === 2 || ev.shiftKey) {
    orbiting = true;
  } else {
    dragging = true;
  }
});
canvas.addEventListener("pointermove", (ev) => {
  if (orbiting) {
    camera.azimuth += (ev.clientX - last[0]) * 0.01;
    camera.elevation += (ev.clientY - last[1]) * 0.01;
    last = [ev.clientX, ev.clientY];
  } else if (dragging) {
    sendGesture({ kind: "drag", dx: ev.clientX - last[0], dy: ev.clientY - last[1] });
  }
});
window.addEventListener("pointerup", () => {
  if (dragging) {
    sendGesture({ kind: "drag_end" });
  }
  dragging = false;
  orbiting = false;
});
canvas.addEventListener("contextmenu", (ev) => ev.preventDefault());

const held = new Set<string>();
window.addEventListener("keydown", (ev) => {
  const key = ev.key.toLowerCase();
  if ("wasdqe".includes(key) && !held.has(key)) {
    held.add(key);
    sendGesture({ kind: "key", key });
  }
});
window.addEventListener("keyup", (ev) => {
  const key = ev.key.toLowerCase();
  if (held.delete(key) && held.size === 0) {
    sendGesture({ kind: "drag_end" });
  }
});

function bindButton(id: string, handler: () => void): void {
  document.getElementById(id)?.addEventListener("click", handler);
}

bindButton("btn_attach", () => {
  const frame = (document.getElementById("attach_frame") as HTMLSelectElement).value;
  sendGesture({ kind: "attach", frame, mode: "preserve_world" });
});
bindButton("btn_detach", () => sendGesture({ kind: "detach" }));
let gripperOn = false;
bindButton("btn_gripper", () => {
  gripperOn = !gripperOn;
  sendGesture({ kind: "gripper", on: gripperOn });
});
bindButton("btn_mode", () => {
  input.mode = input.mode === "drag_effector" ? "twist_joystick" : "drag_effector";
  (document.getElementById("btn_mode") as HTMLButtonElement).textContent =
    input.mode === "drag_effector" ? "mode: drag effector" : "mode: twist joystick";
});
bindButton("btn_virtual", () => { toggles.showVirtualArm = !toggles.showVirtualArm; });
bindButton("btn_filtered", () => { toggles.showFilteredTarget = !toggles.showFilteredTarget; });
bindButton("btn_perspective", () => { camera.perspective = !camera.perspective; });

function draw(nodes: SceneNode[]): void {
  ctx.fillStyle = "#111418";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  for (const node of nodes) {
    if (node.kind === "polyline") {
      ctx.strokeStyle = node.color;
      ctx.lineWidth = node.width;
      ctx.setLineDash(node.dashed ? [6, 6] : []);
      ctx.beginPath();
      node.points.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
      ctx.stroke();
      ctx.setLineDash([]);
    } else if (node.kind === "marker") {
      ctx.fillStyle = node.color;
      ctx.strokeStyle = node.color;
      const [x, y] = node.at;
      if (node.shape === "circle") {
        ctx.beginPath();
        ctx.arc(x, y, node.size, 0, 2 * Math.PI);
        ctx.fill();
      } else if (node.shape === "square") {
        ctx.fillRect(x - node.size, y - node.size, 2 * node.size, 2 * node.size);
      } else {
        ctx.lineWidth = 2;
        ctx.beginPath();
        ctx.moveTo(x - node.size, y - node.size);
        ctx.lineTo(x + node.size, y + node.size);
        ctx.moveTo(x - node.size, y + node.size);
        ctx.lineTo(x + node.size, y - node.size);
        ctx.stroke();
      }
    } else {
      ctx.fillStyle = node.color;
      ctx.font = "14px monospace";
      ctx.fillText(node.text, node.at[0], node.at[1]);
    }
  }
}

function frame(): void {
  const snap = conn.latestSnapshot();
  if (snap !== null) {
    draw(buildScene(snap, toggles, camera, [canvas.width, canvas.height]));
    banner.textContent = conn.lastError
      ? `error: ${conn.lastError}`
      : (conn.connected ? "" : "disconnected");
  } else {
    banner.textContent = conn.connected ? "waiting for snapshots..." : "connecting...";
  }
  requestAnimationFrame(frame);
}

requestAnimationFrame(frame);
