/** Scripted end-to-end session against the real Python service.
 *
 * Spawns the service, drives the actual console (real DOM, real fetch)
 * through hours 0-3 with risk refreshes, commits a cesarean, observes the
 * born event, and cross-checks every displayed number against a direct
 * API call. Session seed 1 is deterministic: the labor stays at risk
 * through hour 4 and the cesarean completes cleanly.
 */
import { ChildProcess, spawn } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../../src/api.js";
import { Console } from "../../src/console.js";
import type { ConsoleDom } from "../../src/ui.js";

const PORT = 8651;
const BASE = `http://127.0.0.1:${PORT}`;
let server: ChildProcess;

async function waitForServer(): Promise<void> {
  for (let attempt = 0; attempt < 120; attempt++) {
    try {
      const r = await fetch(`${BASE}/sessions/none/state`);
      if (r.status === 404) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  server = spawn(
    "python3",
    ["-c",
     "import uvicorn; from laborsim.service import create_app; " +
     `uvicorn.run(create_app(), host='127.0.0.1', port=${PORT}, log_level='error')`],
    { stdio: "ignore" },
  );
  await waitForServer();
});

afterAll(() => {
  server.kill();
});

function dom(): ConsoleDom {
  document.body.innerHTML =
    "<div id='t'></div><div id='p'></div><div id='c'></div><div id='s'></div>";
  return {
    timeline: document.getElementById("t")!,
    panel: document.getElementById("p")!,
    controls: document.getElementById("c")!,
    status: document.getElementById("s")!,
  };
}

describe("scripted console session", () => {
  it("runs hours 0-3, commits a cesarean, and mirrors the server exactly", async () => {
    const d = dom();
    const api = new ApiClient(BASE);
    const console_ = new Console(api, d);
    console_.bind();

    await console_.start({ seed: 1, mode: "coarse" });
    const sid = console_.vm.sessionId!;
    expect(console_.vm.k).toBe(0);

    // hours 0..3: refresh risks, verify the panel against direct API
    // calls, then continue vaginal delivery
    for (let hour = 0; hour <= 3; hour++) {
      expect(console_.vm.k).toBe(hour);
      await console_.refreshRisks();

      const panel = d.panel.querySelector("[data-testid='risk-panel']")!;
      expect(panel.getAttribute("data-hour")).toBe(String(hour));

      const expectedIds = hour === 0 ? [1, 2, 3, 5, 6, 7, 4] : [5, 6, 7, 4];
      const direct = await api.getRisks(sid, expectedIds);
      const shown = [...panel.querySelectorAll(".risk-entry")];
      expect(shown.length).toBe(direct.estimates.length);
      for (let i = 0; i < shown.length; i++) {
        // displayed values are attributable to the server response,
        // bit-for-bit (the service keys replications by hour/estimand)
        expect(JSON.parse(shown[i].getAttribute("data-p")!)).toBe(direct.estimates[i].p);
        expect(JSON.parse(shown[i].getAttribute("data-se")!)).toBe(direct.estimates[i].se);
        expect(shown[i].getAttribute("data-estimand")).toBe(String(direct.estimates[i].estimand_id));
      }
      // the exact oracle backs the coarse panel: zero standard errors
      expect(direct.estimates.every((e) => e.method === "oracle_exact" && e.se === 0)).toBe(true);

      (d.controls.querySelector("#btn-vaginal") as HTMLButtonElement).click();
      await new Promise((resolve) => setTimeout(resolve, 300));
      await console_.resync();
    }

    // hour 4: commit the cesarean and observe the born event
    expect(console_.vm.k).toBe(4);
    expect(console_.vm.terminated).toBe(false);
    await console_.commit("cesarean");

    expect(console_.vm.k).toBe(5);
    expect(console_.vm.terminated).toBe(true);
    expect(console_.vm.events.map((e) => e.event)).toContain("born");
    expect(console_.vm.events.map((e) => e.event)).toContain("cesarean_initiated");

    // irreversibility in the UI: the vaginal control cannot come back
    expect(console_.vm.controls.vaginalEnabled).toBe(false);
    expect(d.controls.querySelector("#btn-vaginal")).toBeNull();
    expect(d.panel.querySelector("[data-testid='outcome-summary']")!.textContent)
      .toContain("born (cesarean)");
    const locked = d.timeline.querySelector("table")!;
    expect(locked.classList.contains("locked")).toBe(true);

    // the view model's session snapshot equals GET /state
    const serverState = await api.getState(sid);
    expect(console_.vm.timeline).toEqual(serverState.history);
    expect(console_.vm.k).toBe(serverState.k);
    expect(console_.vm.terminated).toBe(serverState.terminated);
    expect(console_.vm.events).toEqual(serverState.events);

    await api.deleteSession(sid);
  });

  it("conflicting decisions resolve to a single applied transition", async () => {
    const api = new ApiClient(BASE);
    const session = await api.createSession({ seed: 1, mode: "coarse" });
    const results = await Promise.allSettled([
      api.postDecision(session.session_id, "continue_vaginal", 0),
      api.postDecision(session.session_id, "continue_vaginal", 0),
    ]);
    const ok = results.filter((r) => r.status === "fulfilled").length;
    expect(ok).toBe(1);
    const state = await api.getState(session.session_id);
    expect(state.k).toBe(1);
    await api.deleteSession(session.session_id);
  });
});
