import dataclasses
import math

import numpy as np
import pytest

from laborsim.coarse import cell_to_state, distress_cell, initial_support
from laborsim.config import default_config
from laborsim.errors import ConfigError, NotAtRiskError
from laborsim.estimands import builtin_estimand
from laborsim.oracle import (
    kernel_for,
    needs_usual_care,
    oracle_exact,
    oracle_mc,
    risk_profile,
)
from laborsim.regimes import DynamicFhr, ImmediateCesarean, VaginalOnly
from laborsim.rng import substream
from laborsim.scm import initial_state, sample_baseline, surgical_risk
from laborsim.states import MODE_COARSE


def _conditions(cfg, n, seed, hour=0):
    cells = initial_support(cfg) if hour == 0 else kernel_for(cfg).cells
    rng = substream(seed, "cond")
    return [cell_to_state(cells[rng.integers(len(cells))], hour) for _ in range(n)]


class TestZeroHazard:
    def test_all_specs_zero(self, zero_hazard_coarse, policy):
        cond = cell_to_state(initial_support(zero_hazard_coarse)[0], 0)
        for eid in range(1, 8):
            spec = builtin_estimand(eid, 0, horizon=zero_hazard_coarse.horizon)
            assert oracle_exact(spec, cond, zero_hazard_coarse, policy).p == 0.0
            mc = oracle_mc(spec, cond, zero_hazard_coarse, policy, n_mc=2000,
                           rng=substream(1, "zh", eid))
            assert mc.p == 0.0

    def test_zero_hazard_continuous(self, policy):
        cfg = default_config("continuous", seed=5)
        dyn = dataclasses.replace(
            cfg.continuous,
            hazard=dataclasses.replace(cfg.continuous.hazard, intercept=-np.inf,
                                       abnormal_fhr=0.0, brady_persist=0.0,
                                       high_sbp=0.0, per_hour=0.0),
            surgical=dataclasses.replace(cfg.continuous.surgical, intercept=-np.inf,
                                         high_sbp=0.0))
        cfg = dataclasses.replace(cfg, continuous=dyn)
        rng = substream(2, "init")
        cond = initial_state(sample_baseline(rng, cfg), rng, cfg)
        for eid in (1, 2, 7):
            spec = builtin_estimand(eid, 0, horizon=cfg.horizon)
            mc = oracle_mc(spec, cond, cfg, policy, n_mc=1000, rng=substream(3, "c", eid))
            assert mc.p == 0.0


class TestOneStepIdentities:
    def test_estimand7_is_one_step_hazard(self, coarse_cfg, kernel):
        # a one-hour horizon under action 0 unrolls to the hazard entry
        for cell in (distress_cell(), initial_support(coarse_cfg)[0]):
            cond = cell_to_state(cell, 0)
            got = oracle_exact(builtin_estimand(7, 0), cond, coarse_cfg).p
            idx = kernel.index[cell]
            expected = 1.0 / (1.0 + math.exp(-float(kernel.hazard_logit0[idx])))
            assert got == pytest.approx(expected, abs=1e-12)

    def test_immediate_cesarean_is_surgical_entry(self, coarse_cfg):
        # the cesarean completes in one hour, so only the surgical draw remains
        for cell in (distress_cell(), initial_support(coarse_cfg)[3]):
            cond = cell_to_state(cell, 0)
            got = oracle_exact(builtin_estimand(1, 0, coarse_cfg.horizon), cond, coarse_cfg).p
            expected = surgical_risk(cond.tv, MODE_COARSE, coarse_cfg)
            assert got == pytest.approx(expected, abs=1e-12)


class TestReductions:
    def test_exact_values_equal(self, coarse_cfg, policy):
        for cond in _conditions(coarse_cfg, 5, seed=11):
            p5 = oracle_exact(builtin_estimand(5, 0, coarse_cfg.horizon), cond, coarse_cfg, policy).p
            p2 = oracle_exact(builtin_estimand(2, 0, coarse_cfg.horizon), cond, coarse_cfg, policy).p
            assert p5 == p2
            p6 = oracle_exact(builtin_estimand(6, 0, coarse_cfg.horizon), cond, coarse_cfg, policy).p
            p3 = oracle_exact(builtin_estimand(3, 0, coarse_cfg.horizon), cond, coarse_cfg, policy).p
            assert p6 == p3

    def test_mc_same_seed_identical(self, coarse_cfg, policy):
        cond = cell_to_state(distress_cell(), 0)
        for a, b in ((2, 5), (3, 6)):
            pa = oracle_mc(builtin_estimand(a, 0, coarse_cfg.horizon), cond, coarse_cfg,
                           policy, n_mc=5000, rng=substream(9, "mc"))
            pb = oracle_mc(builtin_estimand(b, 0, coarse_cfg.horizon), cond, coarse_cfg,
                           policy, n_mc=5000, rng=substream(9, "mc"))
            assert pa.p == pb.p


class TestMcAgainstExact:
    @pytest.mark.parametrize("eid", [1, 2, 3, 4, 5, 6, 7])
    def test_agreement(self, coarse_cfg, policy, eid):
        hour = 0 if eid <= 4 else 2
        rng_c = substream(40, "cells", eid)
        cells = kernel_for(coarse_cfg).cells
        cond = cell_to_state(cells[rng_c.integers(len(cells))], hour)
        spec = builtin_estimand(eid, hour, horizon=coarse_cfg.horizon)
        exact = oracle_exact(spec, cond, coarse_cfg, policy).p
        mc = oracle_mc(spec, cond, coarse_cfg, policy, n_mc=40_000,
                       rng=substream(41, "mc", eid))
        se = math.sqrt(max(exact * (1 - exact), 1e-12) / 40_000)
        assert abs(mc.p - exact) <= 4 * se

    def test_continuous_consistency_scalar_vs_batch(self, continuous_cfg, policy):
        # the vectorized oracle engine must match per-trajectory simulation
        from laborsim.regimes import regime_policy
        rng = substream(3, "c0")
        cond = initial_state(sample_baseline(rng, continuous_cfg), rng, continuous_cfg)
        spec = builtin_estimand(2, 0, horizon=continuous_cfg.horizon)
        mc = oracle_mc(spec, cond, continuous_cfg, policy, n_mc=20_000,
                       rng=substream(4, "batch"))
        n, hits = 2_000, 0
        pol = regime_policy(VaginalOnly(), "continuous")
        for i in range(n):
            rr = substream(5, "scalar", i)
            traj = _resume_trajectory(cond, pol, rr, continuous_cfg)
            hits += traj.outcome_by(continuous_cfg.horizon)
        scalar_p = hits / n
        se = math.sqrt(max(mc.p * (1 - mc.p), 1e-9) * (1 / n + 1 / 20_000)) ** 1.0
        assert abs(scalar_p - mc.p) <= 3.5 * math.sqrt(mc.p * (1 - mc.p) / n)


def _resume_trajectory(condition, policy_fn, rng, cfg):
    from laborsim.regimes import History
    from laborsim.scm import transition
    from laborsim.states import Trajectory
    state = condition
    states, actions = [state], []
    while state.z == 1 and state.k < cfg.horizon:
        action = policy_fn(History(states, actions))
        state = transition(state, action, rng, cfg)
        actions.append(action)
        states.append(state)
    return Trajectory(states=states, actions=actions)


class TestMonotoneHorizon:
    def test_cumulative_risk_nondecreasing(self, coarse_cfg, policy, kernel):
        from laborsim.coarse import backward_risk
        for regime in (VaginalOnly(), DynamicFhr(), ImmediateCesarean()):
            prev = np.zeros(kernel.n_cells)
            for h in range(1, coarse_cfg.horizon + 1):
                vals = backward_risk(kernel, regime, 0, h, policy.cell_probs)
                assert (vals >= prev - 1e-12).all(), (regime, h)
                prev = vals


class TestValidation:
    def test_condition_must_be_at_risk(self, coarse_cfg):
        cond = dataclasses.replace(cell_to_state(distress_cell(), 0), z=0, born=True)
        with pytest.raises(NotAtRiskError):
            oracle_exact(builtin_estimand(2, 0, coarse_cfg.horizon), cond, coarse_cfg)

    def test_condition_hour_must_match(self, coarse_cfg):
        cond = cell_to_state(distress_cell(), 1)
        with pytest.raises(ConfigError, match="hour"):
            oracle_exact(builtin_estimand(2, 0, coarse_cfg.horizon), cond, coarse_cfg)

    def test_horizon_beyond_world(self, coarse_cfg):
        cond = cell_to_state(distress_cell(), 0)
        with pytest.raises(ConfigError, match="exceeds"):
            oracle_exact(builtin_estimand(2, 0, horizon=99), cond, coarse_cfg)

    def test_exact_requires_coarse(self, continuous_cfg, policy):
        rng = substream(1, "x")
        cond = initial_state(sample_baseline(rng, continuous_cfg), rng, continuous_cfg)
        with pytest.raises(ConfigError, match="coarse"):
            oracle_exact(builtin_estimand(2, 0, continuous_cfg.horizon), cond, continuous_cfg)

    def test_natural_tail_requires_policy(self, coarse_cfg):
        cond = cell_to_state(distress_cell(), 0)
        spec = builtin_estimand(3, 0, coarse_cfg.horizon)
        assert needs_usual_care(spec)
        with pytest.raises(ConfigError, match="usual-care"):
            oracle_exact(spec, cond, coarse_cfg)

    def test_estimand7_needs_no_policy(self, coarse_cfg):
        # the one-hour horizon never reaches the natural tail
        cond = cell_to_state(distress_cell(), 0)
        spec = builtin_estimand(7, 0)
        assert not needs_usual_care(spec)
        oracle_exact(spec, cond, coarse_cfg)


class TestRiskProfile:
    def test_empty_list(self, coarse_cfg, policy):
        cond = cell_to_state(distress_cell(), 0)
        assert risk_profile([], cond, coarse_cfg, policy) == []

    def test_duplicate_ids_identical(self, coarse_cfg, policy):
        cond = cell_to_state(distress_cell(), 0)
        out = risk_profile([2, 2, 7, 7], cond, coarse_cfg, policy, method="mc",
                           n_mc=5000, seed=12)
        assert out[0].p == out[1].p and out[2].p == out[3].p

    def test_rescue_rule_no_worse_than_vaginal_when_surgery_free(self, coarse_cfg, policy):
        # with surgical risk off, cesarean at first abnormal FHR can only
        # remove future in-labor hazard
        free = dataclasses.replace(
            coarse_cfg,
            coarse=dataclasses.replace(
                coarse_cfg.coarse,
                surgical=dataclasses.replace(coarse_cfg.coarse.surgical,
                                             intercept=-np.inf, high_sbp=0.0)))
        from laborsim.coarse import backward_risk
        kern = kernel_for(free)
        p2 = backward_risk(kern, VaginalOnly(), 0, free.horizon, policy.cell_probs)
        p4 = backward_risk(kern, DynamicFhr(), 0, free.horizon, policy.cell_probs)
        assert (p4 <= p2 + 1e-12).all()

    def test_reanchoring_labels(self, coarse_cfg, policy):
        cells = kernel_for(coarse_cfg).cells
        cond = cell_to_state(cells[10], 3)
        out = risk_profile([1, 2], cond, coarse_cfg, policy)
        assert "re-anchored at hour 3" in out[0].label
        # re-anchored estimand 2 at k equals estimand 5 at k
        p5 = oracle_exact(builtin_estimand(5, 3, coarse_cfg.horizon), cond, coarse_cfg, policy).p
        assert out[1].p == p5
