/** Controller: wires the API client, the view model, and the DOM.
 * One in-flight decision at most; risk refreshes are read-only. */

import { ApiClient, ApiError } from "./api.js";
import {
  ViewModel,
  applyDecision,
  applyRisks,
  applyServerState,
  initialViewModel,
  panelEstimands,
} from "./model.js";
import { ConsoleDom, renderAll } from "./ui.js";

export class Console {
  vm: ViewModel = initialViewModel();
  private responseCounter = 0;

  constructor(
    private api: ApiClient,
    private dom: ConsoleDom,
  ) {}

  private render(): void {
    renderAll(this.dom, this.vm);
  }

  async start(options: { seed?: number; mode?: string } = {}): Promise<void> {
    const payload = await this.api.createSession(options);
    const withHistory = await this.api.getState(payload.session_id);
    this.vm = applyServerState(initialViewModel(), withHistory);
    this.render();
  }

  async refreshRisks(): Promise<void> {
    if (!this.vm.sessionId || this.vm.terminated) return;
    try {
      const response = await this.api.getRisks(
        this.vm.sessionId,
        panelEstimands(this.vm.k),
      );
      this.responseCounter += 1;
      this.vm = applyRisks(this.vm, response.estimates, response.k, this.responseCounter);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        // terminated while we were asking: resync and show the outcome
        await this.resync();
        return;
      }
      throw error;
    }
    this.render();
  }

  async commit(choice: "continue_vaginal" | "cesarean"): Promise<void> {
    const sessionId = this.vm.sessionId;
    if (!sessionId || this.vm.terminated || this.vm.controls.inFlight) return;
    const atHour = this.vm.k;
    this.vm = { ...this.vm, controls: { ...this.vm.controls, inFlight: true } };
    this.render();
    try {
      const payload = await this.api.postDecision(sessionId, choice, atHour);
      this.vm = { ...this.vm, controls: { ...this.vm.controls, inFlight: false } };
      this.vm = applyDecision(this.vm, payload, choice === "cesarean" ? 1 : 0);
    } catch (error) {
      this.vm = { ...this.vm, controls: { ...this.vm.controls, inFlight: false } };
      if (error instanceof ApiError && error.status === 409) {
        await this.resync();
        return;
      }
      this.render();
      throw error;
    }
    this.render();
  }

  /** Re-pull the authoritative state (used after conflicts). */
  async resync(): Promise<void> {
    if (!this.vm.sessionId) return;
    const payload = await this.api.getState(this.vm.sessionId);
    this.vm = applyServerState(this.vm, payload);
    this.render();
  }

  bind(): void {
    this.dom.controls.addEventListener("click", (event) => {
      const target = event.target as HTMLElement;
      if (target.id === "btn-vaginal") void this.commit("continue_vaginal");
      if (target.id === "btn-cesarean") void this.commit("cesarean");
    });
  }
}
