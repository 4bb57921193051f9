/** View model: a faithful mirror of the server session plus panel and
 * control state. The console never computes risks locally — every number
 * in the panel comes from a server response, tracked by a response id. */

import type { RiskEntry, SessionPayload, StateRow } from "./api.js";

export const FHR_LOWER = 110;
export const FHR_UPPER = 160;

/** Abnormal-FHR display rule: above the upper bound, or below the lower
 * bound with the episode sustained long enough to count as persistent. */
export function fhrAbnormalFlag(fhr: string | number, bradyPersist: boolean): boolean {
  if (typeof fhr === "string") {
    return fhr === "bradycardia-persistent" || fhr === "tachycardia";
  }
  return (fhr < FHR_LOWER && bradyPersist) || fhr > FHR_UPPER;
}

/** Numeric plotting position for a vitals value (coarse categories map to
 * representative in/out-of-band values; display only). */
export function fhrDisplayValue(fhr: string | number): number {
  if (typeof fhr === "number") return fhr;
  switch (fhr) {
    case "bradycardia-persistent":
      return 95;
    case "bradycardia-transient":
      return 105;
    case "tachycardia":
      return 175;
    default:
      return 140;
  }
}

export interface RiskPanel {
  hour: number;
  responseId: number;
  entries: RiskEntry[];
  stale: boolean;
}

export interface ControlsState {
  visible: boolean;
  vaginalEnabled: boolean;
  cesareanEnabled: boolean;
  inFlight: boolean;
}

export interface ViewModel {
  sessionId: string | null;
  seed: number | null;
  mode: string;
  horizon: number;
  k: number;
  terminated: boolean;
  timeline: StateRow[];
  events: { hour: number; event: string }[];
  panel: RiskPanel | null;
  controls: ControlsState;
  outcome: string | null;
}

export function initialViewModel(): ViewModel {
  return {
    sessionId: null,
    seed: null,
    mode: "coarse",
    horizon: 0,
    k: 0,
    terminated: false,
    timeline: [],
    events: [],
    panel: null,
    controls: { visible: false, vaginalEnabled: false, cesareanEnabled: false, inFlight: false },
    outcome: null,
  };
}

function outcomeSummary(vm: ViewModel): string | null {
  if (!vm.terminated) return null;
  const last = vm.timeline[vm.timeline.length - 1];
  if (!last) return null;
  if (last.y === 1) return "adverse outcome";
  if (last.born) return last.a === 1 ? "born (cesarean)" : "born (vaginal delivery)";
  return "horizon reached, still in labor";
}

/** Absorb a full server payload (with history) into the view model.
 * The timeline mirrors the server history exactly. */
export function applyServerState(vm: ViewModel, payload: SessionPayload): ViewModel {
  const timeline = payload.history ?? [...vm.timeline.slice(0, -1), payload.state];
  const next: ViewModel = {
    ...vm,
    sessionId: payload.session_id,
    seed: payload.seed,
    mode: payload.mode,
    horizon: payload.horizon,
    k: payload.k,
    terminated: payload.terminated,
    timeline,
    events: payload.events,
    outcome: null,
  };
  next.outcome = outcomeSummary(next);
  const cesareanDone = payload.state.a === 1;
  next.controls = {
    visible: !payload.terminated,
    vaginalEnabled: !payload.terminated && !cesareanDone && !vm.controls.inFlight,
    cesareanEnabled: !payload.terminated && !vm.controls.inFlight,
    inFlight: vm.controls.inFlight,
  };
  // a decision renders any previous panel stale until the next refresh
  if (next.panel && next.panel.hour !== payload.k) {
    next.panel = { ...next.panel, stale: true };
  }
  return next;
}

/** Absorb a decision response: record the committed action on the hour it
 * was taken and append the new hour (the payload carries the new current
 * state but not the full history). */
export function applyDecision(vm: ViewModel, payload: SessionPayload,
                              action: number): ViewModel {
  const timeline = [...vm.timeline];
  if (timeline.length > 0) {
    timeline[timeline.length - 1] = { ...timeline[timeline.length - 1], action };
  }
  timeline.push({ ...payload.state, action: null });
  return applyServerState({ ...vm, timeline }, { ...payload, history: timeline });
}

export function applyRisks(vm: ViewModel, entries: RiskEntry[], hour: number,
                           responseId: number): ViewModel {
  return { ...vm, panel: { hour, responseId, entries, stale: false } };
}

/** Estimand set for the panel: the three sequential questions plus the
 * commit-to-threshold-rule option each hour; the start-of-labor trio only
 * at hour 0. */
export function panelEstimands(hour: number): number[] {
  return hour === 0 ? [1, 2, 3, 5, 6, 7, 4] : [5, 6, 7, 4];
}
