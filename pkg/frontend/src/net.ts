/**
 * WebSocket client with latest-wins snapshot handling: the render loop
 * always reads the newest complete snapshot, stale ones are discarded.
 */

import {
  ClientMessage,
  DecodeError,
  decodeServer,
  encode,
  SnapshotMessage,
} from "./messages.js";

export type Status = "connecting" | "open" | "closed";

export class SimConnection {
  private ws: WebSocket | null = null;
  private latest: SnapshotMessage | null = null;
  status: Status = "connecting";
  lastError = "";
  lastAck = "";

  connect(url: string): void {
    this.status = "connecting";
    this.ws = new WebSocket(url);
    this.ws.onopen = () => { this.status = "open"; };
    this.ws.onclose = () => { this.status = "closed"; };
    this.ws.onerror = () => { this.status = "closed"; };
    this.ws.onmessage = (ev: MessageEvent) => this.handleFrame(String(ev.data));
  }

  handleFrame(text: string): void {
    let msg;
    try {
      msg = decodeServer(text);
    } catch (e) {
      this.lastError = e instanceof DecodeError ? e.message : "bad frame";
      return;
    }
    if (msg.type === "snapshot") {
      if (this.latest === null || msg.tick >= this.latest.tick) {
        this.latest = msg;
      }
    } else if (msg.type === "error") {
      this.lastError = msg.detail;
    } else {
      this.lastAck = `${msg.command} @ tick ${msg.tick}`;
    }
  }

  latestSnapshot(): SnapshotMessage | null {
    return this.latest;
  }

  get connected(): boolean {
    return this.status === "open";
  }

  send(msg: ClientMessage | null): boolean {
    if (msg === null || this.ws === null || this.status !== "open") {
      return false;
    }
    this.ws.send(encode(msg));
    return true;
  }
}
