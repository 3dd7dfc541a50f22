/**
 * Viewer entry point. Connects to the mesh stream named by the `ws` query
 * parameter (host:port or a full ws:// URL, default localhost:9401),
 * renders every snapshot, and lets the pointer stand in for a hand:
 * drag to grab and translate, shift-drag to rotate (arcball), scroll to
 * scale. `grab` overrides the grab radius in meters.
 */

import { Quat, Vec3, qfromAxisAngle, vadd, vcross, vdot, vnormalize, vscale, vsub, QUAT_IDENTITY } from "./math";
import {
  DEFAULT_GRAB_RADIUS,
  GrabState,
  HandSample,
  Pose,
  applyRotation,
  applyTranslation,
  beginGrab,
  grabTest,
} from "./manipulate";
import { decodeMesh, ProtocolError } from "./protocol";
import { MeshRenderer } from "./render";

const FOV = Math.PI / 4;
const RECONNECT_MIN_MS = 500;
const RECONNECT_MAX_MS = 8000;

function wsUrl(): string {
  const param = new URLSearchParams(location.search).get("ws");
  if (!param) return `ws://${location.hostname || "localhost"}:9401`;
  return param.includes("://") ? param : `ws://${param}`;
}

function grabRadius(): number {
  const param = Number(new URLSearchParams(location.search).get("grab"));
  return Number.isFinite(param) && param > 0 ? param : DEFAULT_GRAB_RADIUS;
}

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const statusLine = document.getElementById("status") as HTMLDivElement;
const countsLine = document.getElementById("counts") as HTMLDivElement;
const snapshotLine = document.getElementById("snapshot") as HTMLDivElement;

const renderer = new MeshRenderer(canvas);
const radius = grabRadius();

let pose: Pose = { position: [0, 0, 0], orientation: QUAT_IDENTITY };
let scale = 1;
let haveMesh = false;

// camera basis for mapping pixels to world-space hand positions
function cameraFrame() {
  const d = renderer.viewDistance();
  const eye: Vec3 = [0, -d, renderer.radius * 0.9];
  const forward = vnormalize(vsub([0, 0, 0], eye));
  const right = vnormalize(vcross(forward, [0, 0, 1]));
  const up = vcross(right, forward);
  return { eye, forward, right, up };
}

/** Pointer position on the plane `depth` along the view axis. */
function handAt(px: number, py: number, depth: number): Vec3 {
  const { eye, forward, right, up } = cameraFrame();
  const w = canvas.clientWidth;
  const h = canvas.clientHeight;
  const ndcX = (px / w) * 2 - 1;
  const ndcY = 1 - (py / h) * 2;
  const halfH = Math.tan(FOV / 2) * depth;
  const halfW = (halfH * w) / h;
  return vadd(eye, vadd(vscale(forward, depth), vadd(vscale(right, ndcX * halfW), vscale(up, ndcY * halfH))));
}

/** Map a pixel onto the arcball sphere, camera coordinates. */
function arcballVector(px: number, py: number): Vec3 {
  const w = canvas.clientWidth;
  const h = canvas.clientHeight;
  const r = Math.min(w, h) / 2;
  let x = (px - w / 2) / r;
  let y = (h / 2 - py) / r;
  const d2 = x * x + y * y;
  if (d2 > 1) {
    const d = Math.sqrt(d2);
    x /= d;
    y /= d;
    return [x, y, 0];
  }
  return [x, y, Math.sqrt(1 - d2)];
}

function arcballQuat(from: Vec3, to: Vec3): Quat {
  const axisCam = vcross(from, to);
  const angle = Math.acos(Math.min(1, Math.max(-1, vdot(from, to))));
  if (angle === 0 || (axisCam[0] === 0 && axisCam[1] === 0 && axisCam[2] === 0)) {
    return QUAT_IDENTITY;
  }
  const { forward, right, up } = cameraFrame();
  const axis = vadd(
    vadd(vscale(right, axisCam[0]), vscale(up, axisCam[1])),
    vscale(forward, -axisCam[2]),
  );
  return qfromAxisAngle(axis, angle);
}

type DragMode = "translate" | "rotate";

let grab: GrabState | null = null;
let dragMode: DragMode = "translate";
let grabDepth = 0;
let arcStart: Vec3 = [0, 0, 1];

canvas.addEventListener("pointerdown", (e) => {
  if (!haveMesh || e.button !== 0) return;
  const bounds = renderer.worldBounds(pose, scale);
  if (!bounds) return;
  const { eye, forward } = cameraFrame();
  const center = vscale(vadd(bounds.min, bounds.max), 0.5);
  grabDepth = Math.max(vdot(vsub(center, eye), forward), renderer.radius * 0.1);
  const hand: HandSample = {
    position: handAt(e.offsetX, e.offsetY, grabDepth),
    orientation: QUAT_IDENTITY,
    grabbing: true,
  };
  if (!grabTest(bounds, hand.position, radius)) return;
  dragMode = e.shiftKey ? "rotate" : "translate";
  arcStart = arcballVector(e.offsetX, e.offsetY);
  grab = beginGrab(hand, pose);
  canvas.setPointerCapture(e.pointerId);
});

canvas.addEventListener("pointermove", (e) => {
  if (!grab) return;
  if (dragMode === "translate") {
    const hand: HandSample = {
      position: handAt(e.offsetX, e.offsetY, grabDepth),
      orientation: QUAT_IDENTITY,
      grabbing: true,
    };
    pose = { ...pose, position: applyTranslation(grab, hand) };
  } else {
    const hand: HandSample = {
      position: grab.handStart.position,
      orientation: arcballQuat(arcStart, arcballVector(e.offsetX, e.offsetY)),
      grabbing: true,
    };
    pose = { ...pose, orientation: applyRotation(grab, hand) };
  }
});

function endGrab(e: PointerEvent) {
  if (!grab) return;
  grab = null;
  canvas.releasePointerCapture(e.pointerId);
}
canvas.addEventListener("pointerup", endGrab);
canvas.addEventListener("pointercancel", endGrab);

canvas.addEventListener(
  "wheel",
  (e) => {
    e.preventDefault();
    scale = Math.min(20, Math.max(0.05, scale * Math.exp(-e.deltaY * 0.001)));
  },
  { passive: false },
);

let socket: WebSocket | null = null;
let reconnectDelay = RECONNECT_MIN_MS;
let retryTimer: ReturnType<typeof setTimeout> | null = null;

function setStatus(text: string, ok: boolean) {
  statusLine.textContent = text;
  statusLine.className = ok ? "ok" : "bad";
}

function connect() {
  retryTimer = null;
  const url = wsUrl();
  setStatus(`connecting to ${url}`, false);
  socket = new WebSocket(url);
  socket.binaryType = "arraybuffer";

  socket.onopen = () => {
    reconnectDelay = RECONNECT_MIN_MS;
    setStatus(`connected to ${url}`, true);
  };

  socket.onmessage = (event) => {
    if (!(event.data instanceof ArrayBuffer)) return;
    try {
      const msg = decodeMesh(event.data);
      renderer.setMesh(msg);
      haveMesh = msg.vertexCount > 0;
      countsLine.textContent = `${msg.vertexCount} / ${msg.triangleCount}`;
      snapshotLine.textContent = `snapshot ${new Date().toLocaleTimeString()}`;
    } catch (err) {
      if (err instanceof ProtocolError) {
        console.warn("dropped malformed snapshot:", err.message);
      } else {
        throw err;
      }
    }
  };

  socket.onclose = () => {
    setStatus(`disconnected, retrying in ${(reconnectDelay / 1000).toFixed(1)} s`, false);
    if (!retryTimer) {
      retryTimer = setTimeout(connect, reconnectDelay);
      reconnectDelay = Math.min(RECONNECT_MAX_MS, reconnectDelay * 2);
    }
  };
  socket.onerror = () => socket?.close();
}

function frame() {
  renderer.draw(pose, scale);
  requestAnimationFrame(frame);
}

connect();
requestAnimationFrame(frame);
