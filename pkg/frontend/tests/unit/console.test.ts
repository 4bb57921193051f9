import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../../src/api.js";
import { Console } from "../../src/console.js";
import type { ConsoleDom } from "../../src/ui.js";
import { payload, row } from "./model.test.js";

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

describe("Console.commit", () => {
  let decisions: number;
  let api: ApiClient;

  beforeEach(() => {
    decisions = 0;
    api = new ApiClient("");
    vi.spyOn(api, "createSession").mockResolvedValue(payload());
    vi.spyOn(api, "getState").mockResolvedValue(payload());
    vi.spyOn(api, "getRisks").mockResolvedValue({
      session_id: "abc123", k: 0,
      estimates: [{ estimand_id: 5, label: "", p: 0.3, se: 0, n: 0, method: "oracle_exact" }],
    });
    vi.spyOn(api, "postDecision").mockImplementation(async () => {
      decisions += 1;
      await new Promise((resolve) => setTimeout(resolve, 10));
      const born = row({ k: 1, a: 1, born: true, z: 0 });
      return payload({ k: 1, state: born, history: undefined, terminated: true,
                       events: [{ hour: 1, event: "born" }] });
    });
  });

  it("a double submit applies one decision (in-flight guard)", async () => {
    const console_ = new Console(api, dom());
    await console_.start({ seed: 1 });
    const first = console_.commit("cesarean");
    const second = console_.commit("cesarean");
    await Promise.all([first, second]);
    expect(decisions).toBe(1);
  });

  it("cesarean leaves the vaginal control disabled and then hidden", async () => {
    const d = dom();
    const console_ = new Console(api, d);
    await console_.start({ seed: 1 });
    expect((d.controls.querySelector("#btn-vaginal") as HTMLButtonElement).disabled).toBe(false);
    await console_.commit("cesarean");
    // terminated session: controls are hidden entirely
    expect(console_.vm.controls.visible).toBe(false);
    expect(console_.vm.controls.vaginalEnabled).toBe(false);
    expect(d.controls.querySelector("#btn-vaginal")).toBeNull();
  });

  it("risk refresh populates the panel from the server response", async () => {
    const d = dom();
    const console_ = new Console(api, d);
    await console_.start({ seed: 1 });
    await console_.refreshRisks();
    const entry = d.panel.querySelector(".risk-entry")!;
    expect(JSON.parse(entry.getAttribute("data-p")!)).toBe(0.3);
  });
});
