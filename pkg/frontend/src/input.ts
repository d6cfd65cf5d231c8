/**
 * User gestures -> client messages. Pure functions so the mapping is
 * testable; DOM event wiring lives in main.ts.
 */

import {
  ANGULAR_CAP,
  AttachMessage,
  ClientMessage,
  clampTwist,
  LINEAR_CAP,
  Twist,
} from "./messages.js";

export type InputMode = "drag_effector" | "twist_joystick";

export interface Gesture {
  kind: "drag" | "drag_end" | "key" | "attach" | "detach" | "gripper";
  dx?: number;          // drag vector, px
  dy?: number;
  key?: string;         // one of w a s d q e
  frame?: string;
  mode?: AttachMessage["mode"];
  on?: boolean;
}

export interface InputState {
  connected: boolean;
  mode: InputMode;
  gainRadius: number;   // px of drag that commands the full cap
}

export const DEFAULT_INPUT: InputState = {
  connected: true,
  mode: "drag_effector",
  gainRadius: 120,
};

// screen drag right = +x, drag up = +z (screen y grows downward)
function dragTwist(dx: number, dy: number, state: InputState): Twist {
  const gx = dx / state.gainRadius;
  const gz = -dy / state.gainRadius;
  if (state.mode === "drag_effector") {
    return clampTwist([gx * LINEAR_CAP, 0, gz * LINEAR_CAP, 0, 0, 0]);
  }
  // joystick mode steers orientation: horizontal drag yaws, vertical pitches
  return clampTwist([0, 0, 0, gz * ANGULAR_CAP, 0, gx * ANGULAR_CAP]);
}

const KEY_AXES: Record<string, [number, number]> = {
  w: [0, 1], s: [0, -1],
  a: [1, 1], d: [1, -1],
  q: [2, 1], e: [2, -1],
};

/** Map one gesture to a message, or null when nothing should be sent. */
export function inputToCommand(gesture: Gesture | null,
                               state: InputState): ClientMessage | null {
  if (gesture === null || !state.connected) {
    return null;
  }
  switch (gesture.kind) {
    case "drag": {
      const twist = dragTwist(gesture.dx ?? 0, gesture.dy ?? 0, state);
      return { type: "aux_twist", twist };
    }
    case "drag_end":
      return { type: "aux_twist", twist: [0, 0, 0, 0, 0, 0] };
    case "key": {
      const axis = KEY_AXES[gesture.key ?? ""];
      if (!axis) {
        return null;
      }
      const twist: Twist = [0, 0, 0, 0, 0, 0];
      twist[axis[0]] = axis[1] * LINEAR_CAP;
      return { type: "aux_twist", twist: clampTwist(twist) };
    }
    case "attach":
      if (!gesture.frame) {
        return null;
      }
      return { type: "attach", frame: gesture.frame,
               mode: gesture.mode ?? "preserve_world" };
    case "detach":
      return { type: "detach" };
    case "gripper":
      return { type: "gripper", on: gesture.on ?? false };
  }
}
