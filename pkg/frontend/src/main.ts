import { ApiClient } from "./api.js";
import { Console } from "./console.js";
import { ConsoleDom } from "./ui.js";

function required(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

const dom: ConsoleDom = {
  timeline: required("timeline"),
  panel: required("risk-panel"),
  controls: required("controls"),
  status: required("status"),
};

const api = new ApiClient("");
const console_ = new Console(api, dom);
console_.bind();

const params = new URLSearchParams(window.location.search);
const seed = params.get("seed");
const mode = params.get("mode") ?? "coarse";

required("btn-new-session").addEventListener("click", () => {
  void console_
    .start({ seed: seed ? Number(seed) : undefined, mode })
    .then(() => console_.refreshRisks());
});
required("btn-refresh").addEventListener("click", () => {
  void console_.refreshRisks();
});
