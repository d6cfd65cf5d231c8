/**
 * Pure scene construction: a decoded snapshot plus view toggles and a
 * camera produce a flat list of drawable nodes (polylines, markers,
 * labels) in screen coordinates. Drawing itself lives in main.ts so the
 * scene graph stays testable without a DOM.
 */

import { SnapshotMessage } from "./messages.js";

export interface Camera {
  azimuth: number;    // rad, rotation about world z
  elevation: number;  // rad
  scale: number;      // px per meter
  center: [number, number, number];
  perspective: boolean;
  distance: number;   // camera distance for perspective mode, meters
}

export const DEFAULT_CAMERA: Camera = {
  azimuth: -2.4,
  elevation: 0.35,
  scale: 420,
  center: [0.35, 0.1, 0.3],
  perspective: false,
  distance: 3.0,
};

export interface ViewToggles {
  showVirtualArm: boolean;
  showFilteredTarget: boolean;
}

export type SceneNode =
  | { kind: "polyline"; id: string; points: [number, number][]; color: string; width: number; dashed: boolean }
  | { kind: "marker"; id: string; at: [number, number]; color: string; shape: "circle" | "square" | "cross"; size: number }
  | { kind: "label"; id: string; at: [number, number]; text: string; color: string };

/** World point -> screen point under the camera (y grows downward). */
export function project(p: [number, number, number], cam: Camera,
                        viewport: [number, number]): [number, number] {
  const ca = Math.cos(cam.azimuth), sa = Math.sin(cam.azimuth);
  const ce = Math.cos(cam.elevation), se = Math.sin(cam.elevation);
  const x = p[0] - cam.center[0];
  const y = p[1] - cam.center[1];
  const z = p[2] - cam.center[2];
  // rotate about z by azimuth, then tilt about the screen-x axis
  const rx = ca * x + sa * y;
  const ry = -sa * x + ca * y;
  const sx = ry;
  const sy = se * rx - ce * z;
  const depth = ce * rx + se * z;
  let k = cam.scale;
  if (cam.perspective) {
    k = cam.scale * cam.distance / Math.max(0.2, cam.distance + depth);
  }
  return [viewport[0] / 2 + k * sx, viewport[1] / 2 + k * sy];
}

const COLORS = {
  human: "#8a8f98",
  virtual: "#3b82f6",
  filtered: "#93c5fd",
  robot: "#f97316",
  error: "#ef4444",
  text: "#e5e7eb",
};

function chain(id: string, pts: [number, number][], color: string,
               dashed = false, width = 3): SceneNode {
  return { kind: "polyline", id, points: pts, color, width, dashed };
}

/** Build the scene graph for one snapshot; pure in all arguments. */
export function buildScene(snap: SnapshotMessage, toggles: ViewToggles,
                           cam: Camera, viewport: [number, number]): SceneNode[] {
  const pr = (p: [number, number, number]) => project(p, cam, viewport);
  const nodes: SceneNode[] = [];

  const human = new Map(snap.skeleton.human.map((j) => [j.name, j.p]));
  const spine = ["pelvis", "trunk_top", "head"].map((n) => pr(human.get(n)!));
  const arm = ["trunk_top", "shoulder", "elbow", "hand"].map((n) => pr(human.get(n)!));
  nodes.push(chain("human_spine", spine, COLORS.human));
  nodes.push(chain("human_arm", arm, COLORS.human));
  nodes.push({ kind: "marker", id: "head", at: pr(human.get("head")!),
               color: COLORS.human, shape: "circle", size: 10 });

  nodes.push(chain("robot_arm", snap.skeleton.robot.map(pr), COLORS.robot));
  nodes.push({ kind: "marker", id: "E_R", at: pr(snap.poses.E_R.t),
               color: COLORS.robot, shape: "square", size: 7 });

  const attached = snap.flags.attached;
  if (toggles.showVirtualArm) {
    nodes.push(chain("virtual_link",
                     [pr(snap.poses.E_H.t), pr(snap.poses.E_AR_raw.t)],
                     COLORS.virtual, !attached));
  }
  nodes.push({ kind: "marker", id: "E_AR_raw", at: pr(snap.poses.E_AR_raw.t),
               color: attached ? COLORS.virtual : COLORS.human,
               shape: "circle", size: 7 });
  if (toggles.showFilteredTarget) {
    nodes.push({ kind: "marker", id: "E_AR_filtered",
                 at: pr(snap.poses.E_AR_filtered.t),
                 color: COLORS.filtered, shape: "cross", size: 7 });
  }

  const mm = (snap.errors.d_trans * 1000).toFixed(1);
  const deg = (snap.errors.d_rot * 180 / Math.PI).toFixed(1);
  const flags = [
    attached ? "attached" : "detached",
    snap.flags.gripper ? "gripper closed" : "gripper open",
    snap.flags.unreachable ? "UNREACHABLE" : "",
    snap.flags.singular ? "SINGULAR" : "",
  ].filter(Boolean).join(" | ");
  nodes.push({ kind: "label", id: "readout_error",
               at: [12, 20], color: COLORS.text,
               text: `tracking ${mm} mm / ${deg} deg  @ t=${snap.timestamp.toFixed(2)}s` });
  nodes.push({ kind: "label", id: "readout_flags",
               at: [12, 40], color: COLORS.text, text: flags });
  return nodes;
}
