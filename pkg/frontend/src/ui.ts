/** DOM rendering. Every displayed risk keeps its raw server value in a
 * data attribute so displayed numbers are attributable (and testable)
 * against the originating response. */

import type { StateRow } from "./api.js";
import { FHR_LOWER, FHR_UPPER, fhrAbnormalFlag, fhrDisplayValue, ViewModel } from "./model.js";

function el(tag: string, attrs: Record<string, string> = {}, text?: string): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

function vitalsText(row: StateRow): string {
  if (typeof row.fhr === "string") return row.fhr;
  return `${row.fhr.toFixed(0)} bpm`;
}

export function renderTimeline(container: HTMLElement, vm: ViewModel): void {
  container.textContent = "";
  const locked = vm.timeline.some((row) => row.born);
  const table = el("table", {
    "data-testid": "timeline",
    class: locked ? "timeline locked" : "timeline",
    "aria-disabled": locked ? "true" : "false",
  });

  const hourRow = el("tr", { "data-row": "hour" });
  hourRow.appendChild(el("th", {}, "hour"));
  const fhrRow = el("tr", { "data-row": "fhr" });
  fhrRow.appendChild(el("th", {}, `FHR (band ${FHR_LOWER}-${FHR_UPPER})`));
  const dilatRow = el("tr", { "data-row": "dilatation" });
  dilatRow.appendChild(el("th", {}, "dilatation"));
  const actionRow = el("tr", { "data-row": "action" });
  actionRow.appendChild(el("th", {}, "decision"));
  const eventRow = el("tr", { "data-row": "events" });
  eventRow.appendChild(el("th", {}, "events"));

  const eventsByHour = new Map<number, string[]>();
  for (const event of vm.events) {
    const list = eventsByHour.get(event.hour) ?? [];
    list.push(event.event);
    eventsByHour.set(event.hour, list);
  }

  for (const row of vm.timeline) {
    hourRow.appendChild(el("td", {}, String(row.k)));

    const abnormal = fhrAbnormalFlag(row.fhr, row.brady_persist);
    const value = fhrDisplayValue(row.fhr);
    const inBand = value >= FHR_LOWER && value <= FHR_UPPER;
    const cell = el(
      "td",
      {
        class: inBand ? "fhr in-band" : "fhr out-of-band",
        "data-abnormal": abnormal ? "1" : "0",
      },
      vitalsText(row) + (abnormal ? " ⚠" : ""),
    );
    fhrRow.appendChild(cell);

    dilatRow.appendChild(el("td", {}, `${row.dilatation} cm`));
    const action = row.action === 1 ? "cesarean" : row.action === 0 ? "vaginal" : "—";
    actionRow.appendChild(el("td", { "data-action": String(row.action ?? "") }, action));
    eventRow.appendChild(el("td", {}, (eventsByHour.get(row.k) ?? []).join(", ")));
  }

  for (const row of [hourRow, fhrRow, dilatRow, actionRow, eventRow]) table.appendChild(row);
  container.appendChild(table);
}

export function renderRiskPanel(container: HTMLElement, vm: ViewModel): void {
  container.textContent = "";
  if (vm.terminated) {
    container.appendChild(
      el("div", { "data-testid": "outcome-summary", class: "outcome" },
         `labor ended: ${vm.outcome ?? ""}`),
    );
    return;
  }
  if (!vm.panel) {
    container.appendChild(el("div", { class: "panel-empty" }, "no risks requested yet"));
    return;
  }
  const panel = el("div", {
    "data-testid": "risk-panel",
    class: vm.panel.stale ? "panel stale" : "panel",
    "data-hour": String(vm.panel.hour),
    "data-response-id": String(vm.panel.responseId),
  });
  panel.appendChild(
    el("div", { class: "panel-title" },
       `what-if risks at hour ${vm.panel.hour}` + (vm.panel.stale ? " (stale)" : "")),
  );
  for (const entry of vm.panel.entries) {
    const line = el("div", {
      class: "risk-entry",
      "data-estimand": String(entry.estimand_id),
      "data-method": entry.method,
      "data-p": JSON.stringify(entry.p),
      "data-se": JSON.stringify(entry.se),
    });
    const margin = 2 * entry.se;
    line.textContent =
      `${entry.label || "estimand " + entry.estimand_id}: ` +
      `${(100 * entry.p).toFixed(2)}%` +
      (entry.se > 0 ? ` ± ${(100 * margin).toFixed(2)}%` : "") +
      ` [${entry.method}]`;
    panel.appendChild(line);
  }
  container.appendChild(panel);
}

export function renderControls(container: HTMLElement, vm: ViewModel): void {
  container.textContent = "";
  if (!vm.controls.visible) return;
  const vaginal = el("button", { id: "btn-vaginal", "data-testid": "btn-vaginal" },
                     "continue vaginal delivery");
  const cesarean = el("button", { id: "btn-cesarean", "data-testid": "btn-cesarean" },
                      "perform cesarean");
  (vaginal as HTMLButtonElement).disabled = !vm.controls.vaginalEnabled || vm.controls.inFlight;
  (cesarean as HTMLButtonElement).disabled = !vm.controls.cesareanEnabled || vm.controls.inFlight;
  container.appendChild(vaginal);
  container.appendChild(cesarean);
}

export interface ConsoleDom {
  timeline: HTMLElement;
  panel: HTMLElement;
  controls: HTMLElement;
  status: HTMLElement;
}

export function renderAll(dom: ConsoleDom, vm: ViewModel): void {
  renderTimeline(dom.timeline, vm);
  renderRiskPanel(dom.panel, vm);
  renderControls(dom.controls, vm);
  dom.status.textContent = vm.sessionId
    ? `session ${vm.sessionId.slice(0, 8)} | ${vm.mode} | hour ${vm.k}` +
      (vm.terminated ? " | ended" : "")
    : "no session";
}
