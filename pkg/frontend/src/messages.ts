/**
 * Wire messages for the /sim WebSocket, mirroring the server schema.
 * Transforms travel as {from, to, q: [w,x,y,z], t: [x,y,z]}.
 */

export interface WireTransform {
  from: string;
  to: string;
  q: [number, number, number, number];
  t: [number, number, number];
}

export type Twist = [number, number, number, number, number, number];

// server-side caps; the client clamps before sending so a message can
// never exceed them
export const LINEAR_CAP = 0.5;   // m/s
export const ANGULAR_CAP = 1.5;  // rad/s

export interface AuxTwistMessage {
  type: "aux_twist";
  twist: Twist;
  gripper?: boolean;
  apply_at_tick?: number;
}

export interface AttachMessage {
  type: "attach";
  frame: string;
  mode: "preserve_world" | "preserve_linkage";
  apply_at_tick?: number;
}

export interface DetachMessage {
  type: "detach";
  apply_at_tick?: number;
}

export interface GripperMessage {
  type: "gripper";
  on: boolean;
  apply_at_tick?: number;
}

export interface PauseMessage {
  type: "pause";
}

export interface ResumeMessage {
  type: "resume";
}

export type ClientMessage =
  | AuxTwistMessage
  | AttachMessage
  | DetachMessage
  | GripperMessage
  | PauseMessage
  | ResumeMessage;

export interface SnapshotMessage {
  type: "snapshot";
  tick: number;
  timestamp: number;
  poses: {
    E_H: WireTransform;
    E_AR_raw: WireTransform;
    E_AR_filtered: WireTransform;
    E_R: WireTransform;
  };
  robot_q: number[];
  errors: { d_trans: number; d_rot: number };
  flags: { attached: boolean; gripper: boolean; unreachable: boolean; singular: boolean };
  skeleton: {
    human: { name: string; p: [number, number, number] }[];
    robot: [number, number, number][];
  };
  dropped: number;
}

export interface AckMessage {
  type: "ack";
  command: string;
  tick: number;
}

export interface ErrorMessage {
  type: "error";
  detail: string;
}

export type ServerMessage = SnapshotMessage | AckMessage | ErrorMessage;

export class DecodeError extends Error {
  constructor(public field: string, detail: string) {
    super(`${field}: ${detail}`);
  }
}

/** Clamp the linear and angular parts of a twist to the server caps. */
export function clampTwist(twist: Twist): Twist {
  const v = twist.slice(0, 3);
  const w = twist.slice(3, 6);
  const vn = Math.hypot(v[0], v[1], v[2]);
  if (vn > LINEAR_CAP) {
    const k = LINEAR_CAP / vn;
    v[0] *= k; v[1] *= k; v[2] *= k;
  }
  const wn = Math.hypot(w[0], w[1], w[2]);
  if (wn > ANGULAR_CAP) {
    const k = ANGULAR_CAP / wn;
    w[0] *= k; w[1] *= k; w[2] *= k;
  }
  // + 0 folds negative zeros away
  return [v[0] + 0, v[1] + 0, v[2] + 0, w[0] + 0, w[1] + 0, w[2] + 0];
}

const SERVER_TYPES = new Set(["snapshot", "ack", "error"]);

/** Parse one server frame; throws DecodeError naming the offending field. */
export function decodeServer(text: string): ServerMessage {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    throw new DecodeError("<frame>", "not valid JSON");
  }
  if (typeof doc !== "object" || doc === null) {
    throw new DecodeError("<frame>", "expected a JSON object");
  }
  const msg = doc as Record<string, unknown>;
  if (typeof msg.type !== "string") {
    throw new DecodeError("type", "missing");
  }
  if (!SERVER_TYPES.has(msg.type)) {
    throw new DecodeError("type", `unknown message type ${msg.type}`);
  }
  if (msg.type === "snapshot") {
    for (const field of ["tick", "timestamp", "poses", "robot_q", "errors", "flags", "skeleton"]) {
      if (!(field in msg)) {
        throw new DecodeError(field, "missing");
      }
    }
  }
  return msg as unknown as ServerMessage;
}

export function encode(msg: ClientMessage): string {
  return JSON.stringify(msg);
}
