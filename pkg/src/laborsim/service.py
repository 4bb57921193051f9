"""Interactive session service: live simulated labors over HTTP.

A session holds one simulated patient advancing hour by hour under the
operator's decisions (the true generative process draws the transitions).
Risk queries evaluate the built-in what-if estimands at the session's
current state against the oracle — exact in coarse mode — and, when fitted
models are loaded, side by side with the g-computation estimates, without
mutating the session. Randomness is keyed so that replaying a decision
sequence reproduces the event log exactly regardless of interleaved
queries.

Endpoints (JSON bodies; errors are ``{"code": ..., "message": ...}``):

* ``POST /sessions`` ``{seed?, mode?}`` — create; server picks a seed when
  omitted and echoes it.
* ``GET /sessions/{id}/state`` — current state, history, event log.
* ``GET /sessions/{id}/risks?estimands=5,6,7&n_mc=20000&method=auto``
* ``POST /sessions/{id}/decision`` ``{action, at_hour}`` — apply one hour;
  ``at_hour`` must equal the session's current hour (stale or concurrent
  submissions conflict instead of double-applying).
* ``GET /sessions/{id}/snapshot`` / ``POST /sessions/restore`` — resume.
* ``DELETE /sessions/{id}``
"""
from __future__ import annotations

import secrets
import threading
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .config import ScmConfig, config_from_json_dict, default_config
from .dataset import ROUND_DECIMALS
from .errors import LaborSimError
from .estimands import RiskEstimate
from .estimators import TransitionModels, gcomp_predict
from .oracle import risk_profile
from .policy import UsualCarePolicy, default_policy, policy_from_json_dict, policy_to_json_dict
from .rng import substream
from .scm import initial_state, sample_baseline, transition
from .states import (
    BP_CATEGORIES,
    FHR_CATEGORIES,
    MODE_COARSE,
    MODE_CONTINUOUS,
    PatientState,
)

ACTION_NAMES = {"continue_vaginal": 0, "cesarean": 1}
DEFAULT_N_MC = 20_000


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _state_payload(state: PatientState, mode: str) -> dict:
    tv = state.tv
    if mode == MODE_COARSE:
        vitals = {
            "fhr": FHR_CATEGORIES[int(tv.fhr)],
            "brady_persist": bool(tv.brady_persist),
            "dilatation": int(tv.dilatation),
            "sbp": BP_CATEGORIES[int(tv.sbp)],
            "dbp": BP_CATEGORIES[int(tv.dbp)],
        }
    else:
        vitals = {
            "fhr": round(float(tv.fhr), ROUND_DECIMALS),
            "brady_persist": bool(tv.brady_persist),
            "dilatation": round(float(tv.dilatation), ROUND_DECIMALS),
            "sbp": round(float(tv.sbp), ROUND_DECIMALS),
            "dbp": round(float(tv.dbp), ROUND_DECIMALS),
        }
    return {
        "k": state.k,
        "maternal_age": round(float(state.baseline.maternal_age), ROUND_DECIMALS),
        "parity": state.baseline.parity,
        "history_preterm": bool(state.baseline.history_preterm),
        **vitals,
        "a": state.a,
        "z": state.z,
        "y": state.y,
        "born": bool(state.born),
    }


@dataclass
class Session:
    session_id: str
    seed: int
    cfg: ScmConfig
    policy: UsualCarePolicy
    states: list[PatientState]
    actions: list[int] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def current(self) -> PatientState:
        return self.states[-1]

    @property
    def terminated(self) -> bool:
        return self.current.z == 0 or self.current.k >= self.cfg.horizon

    def apply(self, action: int) -> list[dict]:
        prev = self.current
        rng = substream(self.seed, "transition", prev.k)
        state = transition(prev, action, rng, self.cfg)
        self.states.append(state)
        self.actions.append(action)
        new_events = []
        if action == 1:
            new_events.append({"hour": prev.k, "event": "cesarean_initiated"})
        if state.born and not prev.born:
            new_events.append({"hour": state.k, "event": "born"})
        if state.y == 1 and prev.y == 0:
            new_events.append({"hour": state.k, "event": "adverse_outcome"})
        if state.z == 1 and state.k >= self.cfg.horizon:
            new_events.append({"hour": state.k, "event": "horizon_reached"})
        self.events.extend(new_events)
        return new_events

    def payload(self) -> dict:
        return {
            "session_id": self.session_id,
            "seed": self.seed,
            "mode": self.cfg.mode,
            "horizon": self.cfg.horizon,
            "k": self.current.k,
            "terminated": self.terminated,
            "state": _state_payload(self.current, self.cfg.mode),
            "events": list(self.events),
        }

    def history_payload(self) -> list[dict]:
        rows = []
        for i, s in enumerate(self.states):
            row = _state_payload(s, self.cfg.mode)
            row["action"] = self.actions[i] if i < len(self.actions) else None
            rows.append(row)
        return rows

    def snapshot(self) -> dict:
        return {
            "session_id": self.session_id,
            "seed": self.seed,
            "scm": self.cfg.to_json_dict(),
            "policy": policy_to_json_dict(self.policy),
            "decisions": list(self.actions),
            "events": list(self.events),
        }


def _restore_session(snap: dict) -> Session:
    cfg = config_from_json_dict(snap["scm"])
    policy = policy_from_json_dict(snap["policy"])
    session = _new_session(snap["session_id"], int(snap["seed"]), cfg, policy)
    for action in snap.get("decisions", []):
        session.apply(int(action))
    return session


def _new_session(session_id: str, seed: int, cfg: ScmConfig, policy: UsualCarePolicy) -> Session:
    rng = substream(seed, "init")
    baseline = sample_baseline(rng, cfg)
    state = initial_state(baseline, rng, cfg)
    return Session(session_id=session_id, seed=seed, cfg=cfg, policy=policy, states=[state])


def create_app(coarse_cfg: ScmConfig | None = None,
               continuous_cfg: ScmConfig | None = None,
               policy: UsualCarePolicy | None = None,
               models: TransitionModels | None = None,
               console_dir: str | None = None) -> FastAPI:
    """Build the service app. ``models`` enables side-by-side fitted
    (g-computation) estimates next to the oracle risks; ``console_dir``
    mounts the browser console's static build at /console."""
    app = FastAPI(title="laborsim risk service")
    base_cfgs = {
        MODE_COARSE: coarse_cfg or default_config(MODE_COARSE, seed=0),
        MODE_CONTINUOUS: continuous_cfg or default_config(MODE_CONTINUOUS, seed=0),
    }
    care = policy or default_policy()
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()

    @app.exception_handler(ServiceError)
    async def _service_error(_req: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    @app.exception_handler(LaborSimError)
    async def _domain_error(_req: Request, exc: LaborSimError):
        return JSONResponse(status_code=422,
                            content={"code": type(exc).__name__, "message": str(exc)})

    def _get(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise ServiceError(404, "unknown_session", f"no session {session_id}")
        return session

    @app.post("/sessions", status_code=201)
    def create_session(body: dict | None = None):
        body = body or {}
        unknown = set(body) - {"seed", "mode"}
        if unknown:
            raise ServiceError(422, "bad_request", f"unknown fields {sorted(unknown)}")
        mode = body.get("mode", MODE_COARSE)
        if mode not in base_cfgs:
            raise ServiceError(422, "invalid_mode", f"mode must be coarse or continuous, got {mode!r}")
        seed = body.get("seed")
        if seed is None:
            seed = secrets.randbits(63)
        elif not isinstance(seed, int) or seed < 0:
            raise ServiceError(422, "bad_request", "seed must be a non-negative integer")
        session_id = uuid.uuid4().hex
        session = _new_session(session_id, int(seed), base_cfgs[mode], care)
        with registry_lock:
            sessions[session_id] = session
        return session.payload()

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        session = _get(session_id)
        payload = session.payload()
        payload["history"] = session.history_payload()
        return payload

    @app.get("/sessions/{session_id}/risks")
    def get_risks(session_id: str, estimands: str = "5,6,7",
                  n_mc: int = DEFAULT_N_MC, method: str = "auto"):
        session = _get(session_id)
        if session.terminated:
            raise ServiceError(409, "session_terminated",
                               "no risks to estimate: the session is no longer at risk")
        try:
            ids = [int(x) for x in estimands.split(",") if x.strip()]
        except ValueError:
            raise ServiceError(422, "bad_request", f"bad estimands list {estimands!r}")
        if not ids or any(i not in range(1, 8) for i in ids):
            raise ServiceError(422, "bad_request", "estimand ids must be in 1..7")
        if n_mc < 1 or n_mc > 1_000_000:
            raise ServiceError(422, "bad_request", "n_mc must be in 1..1000000")
        condition = session.current
        estimates = risk_profile(ids, condition, session.cfg, care,
                                 method=method, n_mc=n_mc, seed=session.seed)
        rows = [_estimate_payload(eid, est) for eid, est in zip(ids, estimates)]
        if models is not None and session.cfg.mode == MODE_COARSE:
            rows.extend(_fitted_rows(ids, condition, session))
        return {"session_id": session_id, "k": condition.k, "estimates": rows}

    def _fitted_rows(ids: list[int], condition: PatientState, session: Session) -> list[dict]:
        from .estimands import builtin_estimand, EstimandSpec, builtin_label
        out = []
        for eid in ids:
            if eid <= 4 and condition.k > 0:
                base = builtin_estimand(eid, 0, horizon=session.cfg.horizon)
                spec = EstimandSpec(moment_of_use=condition.k, regime=base.regime,
                                    horizon=base.horizon)
            else:
                spec = builtin_estimand(eid, condition.k, horizon=session.cfg.horizon)
            rng = substream(session.seed, "fitted-risk", condition.k, eid, DEFAULT_N_MC)
            est = gcomp_predict(models, condition, spec, n_mc=DEFAULT_N_MC, rng=rng)
            row = _estimate_payload(eid, est)
            row["label"] = f"{builtin_label(eid)} [fitted]"
            out.append(row)
        return out

    @app.post("/sessions/{session_id}/decision")
    def post_decision(session_id: str, body: dict):
        session = _get(session_id)
        unknown = set(body) - {"action", "at_hour"}
        if unknown:
            raise ServiceError(422, "bad_request", f"unknown fields {sorted(unknown)}")
        action_name = body.get("action")
        if action_name not in ACTION_NAMES:
            raise ServiceError(422, "bad_request",
                               f"action must be one of {sorted(ACTION_NAMES)}, got {action_name!r}")
        if "at_hour" not in body or not isinstance(body["at_hour"], int):
            raise ServiceError(422, "bad_request", "at_hour (current hour) is required")
        with session.lock:
            if session.terminated:
                raise ServiceError(409, "session_terminated",
                                   "the labor has ended; no further decisions")
            if body["at_hour"] != session.current.k:
                raise ServiceError(409, "stale_decision",
                                   f"decision targets hour {body['at_hour']} but the session is at "
                                   f"hour {session.current.k}")
            action = ACTION_NAMES[action_name]
            if action < session.current.a:
                raise ServiceError(409, "irreversible",
                                   "cesarean is irreversible: cannot continue vaginal delivery")
            new_events = session.apply(action)
        payload = session.payload()
        payload["new_events"] = new_events
        return payload

    @app.get("/sessions/{session_id}/snapshot")
    def get_snapshot(session_id: str):
        return _get(session_id).snapshot()

    @app.post("/sessions/restore", status_code=201)
    def restore(body: dict):
        if "session_id" not in body or "seed" not in body or "scm" not in body:
            raise ServiceError(422, "bad_request", "snapshot requires session_id, seed, scm")
        with registry_lock:
            if body["session_id"] in sessions:
                raise ServiceError(409, "session_exists",
                                   f"session {body['session_id']} already loaded")
            session = _restore_session(body)
            sessions[session.session_id] = session
        return session.payload()

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        with registry_lock:
            if sessions.pop(session_id, None) is None:
                raise ServiceError(404, "unknown_session", f"no session {session_id}")

    if console_dir:
        app.mount("/console", StaticFiles(directory=console_dir, html=True), name="console")

    return app


def _estimate_payload(eid: int, est: RiskEstimate) -> dict:
    return {"estimand_id": eid, "label": est.label, "p": est.p, "se": est.se,
            "n": est.n, "method": est.method}
