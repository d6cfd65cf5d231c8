import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { buildScene, DEFAULT_CAMERA, project } from "../src/scene.js";
import { SnapshotMessage } from "../src/messages.js";

const snapshot: SnapshotMessage = JSON.parse(readFileSync(
  new URL("../fixtures/snapshot.json", import.meta.url), "utf8"));
const golden = JSON.parse(readFileSync(
  new URL("../fixtures/scene_golden.json", import.meta.url), "utf8"));

const toggles = { showVirtualArm: true, showFilteredTarget: true };
const viewport: [number, number] = [1280, 760];

describe("buildScene", () => {
  it("matches the golden fixture node for node", () => {
    const nodes = buildScene(snapshot, toggles, DEFAULT_CAMERA, viewport);
    expect(nodes.length).toBe(golden.length);
    expect(nodes).toEqual(golden);
  });

  it("marker positions agree with the projected snapshot poses", () => {
    const nodes = buildScene(snapshot, toggles, DEFAULT_CAMERA, viewport);
    const marker = nodes.find((n) => n.id === "E_AR_raw");
    expect(marker?.kind).toBe("marker");
    const expected = project(snapshot.poses.E_AR_raw.t, DEFAULT_CAMERA, viewport);
    if (marker?.kind === "marker") {
      expect(marker.at[0]).toBeCloseTo(expected[0], 9);
      expect(marker.at[1]).toBeCloseTo(expected[1], 9);
    }
  });

  it("is a pure function of snapshot and toggles", () => {
    const a = buildScene(snapshot, toggles, DEFAULT_CAMERA, viewport);
    const b = buildScene(snapshot, toggles, DEFAULT_CAMERA, viewport);
    expect(a).toEqual(b);
  });

  it("hides the virtual arm and filtered marker per toggles", () => {
    const nodes = buildScene(snapshot, { showVirtualArm: false, showFilteredTarget: false },
                             DEFAULT_CAMERA, viewport);
    expect(nodes.find((n) => n.id === "virtual_link")).toBeUndefined();
    expect(nodes.find((n) => n.id === "E_AR_filtered")).toBeUndefined();
  });

  it("styles the virtual limb dashed when detached", () => {
    const detached = structuredClone(snapshot);
    detached.flags.attached = false;
    const nodes = buildScene(detached, toggles, DEFAULT_CAMERA, viewport);
    const link = nodes.find((n) => n.id === "virtual_link");
    if (link?.kind === "polyline") {
      expect(link.dashed).toBe(true);
    } else {
      throw new Error("virtual_link missing");
    }
  });
});
