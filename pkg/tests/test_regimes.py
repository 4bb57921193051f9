import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laborsim.errors import ConfigError, DataFormatError
from laborsim.regimes import (
    DynamicFhr,
    FixThenNatural,
    History,
    ImmediateCesarean,
    NaturalCourse,
    StaticSequence,
    VaginalOnly,
    decide,
    fhr_abnormal_flag,
    is_regime_consistent,
    pinned_action,
    regime_from_json,
    regime_policy,
    regime_to_json,
)
from laborsim.states import (
    BaselineCovariates,
    FHR_BRADY_PERSISTENT,
    FHR_NORMAL,
    FHR_TACHYCARDIA,
    PatientState,
    TimeVaryingCovariates,
)

BASELINE = BaselineCovariates(maternal_age=30.0, parity=0, history_preterm=False)


def coarse_state(k, fhr=FHR_NORMAL, dilat=3):
    tv = TimeVaryingCovariates(fhr=fhr, brady_persist=(fhr == FHR_BRADY_PERSISTENT),
                               dilatation=dilat, sbp=0, dbp=0)
    return PatientState(k=k, baseline=BASELINE, tv=tv)


def history_from_flags(flags):
    """Coarse history whose abnormal indicator per hour is the given 0/1s."""
    states = [coarse_state(k, fhr=FHR_TACHYCARDIA if f else FHR_NORMAL)
              for k, f in enumerate(flags)]
    return History(states=states, actions=[0] * (len(states) - 1))


class TestAbnormalFlag:
    def test_normal_band(self):
        assert fhr_abnormal_flag(130.0, False) == 0
        assert fhr_abnormal_flag(110.0, False) == 0
        assert fhr_abnormal_flag(160.0, False) == 0

    def test_tachycardia(self):
        assert fhr_abnormal_flag(170.0, False) == 1

    def test_bradycardia_needs_persistence(self):
        assert fhr_abnormal_flag(100.0, False) == 0
        assert fhr_abnormal_flag(100.0, True) == 1

    def test_custom_thresholds(self):
        assert fhr_abnormal_flag(118.0, True, lower=120.0, upper=170.0) == 1
        assert fhr_abnormal_flag(165.0, False, lower=120.0, upper=170.0) == 0


class TestDecide:
    def test_vaginal_only_always_zero(self):
        h = history_from_flags([1, 1, 1])
        assert decide(VaginalOnly(), h, "coarse") == 0

    def test_dynamic_first_trigger(self):
        decisions = []
        for upto in range(1, 5):
            h = history_from_flags([0, 0, 1, 0][:upto])
            decisions.append(decide(DynamicFhr(), h, "coarse"))
        assert decisions == [0, 0, 1, 1]

    def test_fix_then_natural_delegates(self):
        always_ces = lambda hist: 1
        h0 = history_from_flags([0])
        h1 = history_from_flags([0, 0])
        regime = FixThenNatural(fix_action=0, fix_hours=1)
        assert decide(regime, h0, "coarse", always_ces) == 0
        assert decide(regime, h1, "coarse", always_ces) == 1

    def test_missing_usual_care_is_error(self):
        with pytest.raises(ConfigError, match="usual-care"):
            decide(NaturalCourse(), history_from_flags([0]), "coarse")

    def test_static_sequence_exhausted(self):
        with pytest.raises(DataFormatError, match="exhausted"):
            decide(StaticSequence(actions=(0,)), history_from_flags([0, 0]), "coarse")

    def test_static_sequence_rejects_reversal(self):
        with pytest.raises(ConfigError, match="revert"):
            StaticSequence(actions=(1, 0))

    def test_decide_requires_at_risk(self):
        from laborsim.errors import NotAtRiskError
        import dataclasses
        s = dataclasses.replace(coarse_state(0), z=0, born=True)
        with pytest.raises(NotAtRiskError):
            decide(VaginalOnly(), History(states=[s]), "coarse")


class TestConsistency:
    def _trajectory(self, cfg, policy_fn, seed=0):
        from laborsim.rng import substream
        from laborsim.scm import sample_baseline, simulate_trajectory
        rng = substream(seed, "traj")
        return simulate_trajectory(sample_baseline(rng, cfg), policy_fn, rng, cfg)

    def test_round_trip_all_regimes(self, coarse_cfg, policy):
        regimes = [VaginalOnly(), ImmediateCesarean(), DynamicFhr(),
                   FixThenNatural(0, 2), NaturalCourse(),
                   StaticSequence(actions=tuple([0] * coarse_cfg.horizon))]
        for i, regime in enumerate(regimes):
            from laborsim.rng import substream
            rng = substream(7, "rt", i)
            pol = regime_policy(regime, "coarse", policy.as_policy(rng, "coarse"))
            traj = self._trajectory(coarse_cfg, pol, seed=100 + i)
            assert is_regime_consistent(traj, regime, 0, "coarse"), regime

    def test_all_vaginal_inconsistent_with_cesarean(self, zero_hazard_coarse):
        traj = self._trajectory(zero_hazard_coarse, lambda h: 0)
        assert not is_regime_consistent(traj, ImmediateCesarean(), 0, "coarse")
        assert is_regime_consistent(traj, VaginalOnly(), 0, "coarse")

    def test_natural_tail_consistent_with_anything(self, zero_hazard_coarse):
        traj = self._trajectory(zero_hazard_coarse, lambda h: 1 if h.position >= 2 else 0)
        assert is_regime_consistent(traj, NaturalCourse(), 0, "coarse")
        assert is_regime_consistent(traj, FixThenNatural(0, 2), 0, "coarse")
        assert not is_regime_consistent(traj, FixThenNatural(0, 3), 0, "coarse")

    def test_consistency_fraction_matches_first_hour_probability(self, coarse_cfg, policy):
        # FixThenNatural(0, 1) anchored at 0 constrains only hour 0.
        from laborsim.datagen import generate_dataset
        from laborsim.oracle import kernel_for
        ds = generate_dataset(20_000, coarse_cfg, policy, seed=21)
        kern = kernel_for(coarse_cfg)
        p1 = policy.cell_probs(0, kern)
        hour0 = ds.at_risk_index(0)
        cells = np.asarray([kern.index[(f, d, s, b)] for f, d, s, b in zip(
            ds.cols["fhr"][hour0], ds.cols["dilatation"][hour0],
            ds.cols["sbp"][hour0], ds.cols["dbp"][hour0])])
        expected = float(np.mean(1.0 - p1[cells]))
        actions = ds.action_rows()[hour0]
        observed = float(np.mean(actions == 0))
        se = np.sqrt(expected * (1 - expected) / hour0.size)
        assert abs(observed - expected) <= 3 * se


class TestEquivalences:
    def test_fix_then_natural_full_window_is_vaginal_only(self, coarse_cfg):
        K = coarse_cfg.horizon
        for flags in ([0] * 5, [0, 1, 0, 1], [1, 1, 1]):
            for upto in range(1, len(flags) + 1):
                h = history_from_flags(flags[:upto])
                a = decide(FixThenNatural(0, K), h, "coarse", usual_care=lambda _: 1)
                b = decide(VaginalOnly(), h, "coarse")
                assert a == b == 0

    def test_static_zeroes_is_vaginal_only(self):
        seq = StaticSequence(actions=(0,) * 12)
        for upto in range(1, 6):
            h = history_from_flags([0] * upto)
            assert decide(seq, h, "coarse") == decide(VaginalOnly(), h, "coarse")

    def test_static_ones_is_immediate_cesarean(self):
        seq = StaticSequence(actions=(1,) * 12)
        h = history_from_flags([0])
        assert decide(seq, h, "coarse") == decide(ImmediateCesarean(), h, "coarse") == 1


@st.composite
def flag_histories(draw):
    flags = draw(st.lists(st.integers(0, 1), min_size=1, max_size=10))
    return flags


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(flag_histories())
    def test_monotone_decisions_along_realized_paths(self, flags):
        # Feed each regime's own decisions back into the history: the
        # realized decision sequence must never revert a cesarean, even
        # when the usual-care tail would prefer 0.
        regimes = [VaginalOnly(), ImmediateCesarean(), DynamicFhr(),
                   FixThenNatural(0, 2), FixThenNatural(1, 3), NaturalCourse(),
                   StaticSequence(actions=(0, 0, 1) + (1,) * 10)]
        usual = lambda h: int(len(h.states) % 2 == 0)
        states = history_from_flags(flags).states
        for regime in regimes:
            decisions = []
            for upto in range(1, len(flags) + 1):
                h = History(states=states[:upto], actions=decisions[:upto - 1])
                decisions.append(decide(regime, h, "coarse", usual))
            assert (np.diff(decisions) >= 0).all(), (regime, flags, decisions)

    @settings(max_examples=200, deadline=None)
    @given(flag_histories())
    def test_dynamic_depends_only_on_first_trigger(self, flags):
        h = history_from_flags(flags)
        d = decide(DynamicFhr(), h, "coarse")
        if 1 in flags:
            assert d == 1
            # permuting flags after the first trigger changes nothing
            first = flags.index(1)
            tail = flags[first + 1:]
            permuted = flags[:first + 1] + tail[::-1]
            assert decide(DynamicFhr(), history_from_flags(permuted), "coarse") == 1
        else:
            assert d == 0


class TestSerialization:
    @pytest.mark.parametrize("regime", [
        VaginalOnly(), ImmediateCesarean(), NaturalCourse(),
        DynamicFhr(), DynamicFhr(lower=105.0, upper=170.0),
        FixThenNatural(0, 1), StaticSequence(actions=(0, 1, 1)),
    ])
    def test_round_trip(self, regime):
        assert regime_from_json(regime_to_json(regime)) == regime

    def test_tags_are_stable(self):
        assert regime_to_json(DynamicFhr()) == (
            '{"lower": 110.0, "type": "dynamic_fhr", "upper": 160.0}')

    def test_unknown_tag_rejected(self):
        with pytest.raises(ConfigError, match="unknown regime type"):
            regime_from_json('{"type": "teleport"}')

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError, match="bad regime payload"):
            regime_from_json('{"type": "vaginal_only", "x": 1}')


class TestPinnedAction:
    def test_values(self):
        assert pinned_action(VaginalOnly(), 5) == 0
        assert pinned_action(ImmediateCesarean(), 0) == 1
        assert pinned_action(FixThenNatural(0, 2), 1) == 0
        assert pinned_action(FixThenNatural(0, 2), 2) is None
        assert pinned_action(NaturalCourse(), 0) is None
        with pytest.raises(ConfigError):
            pinned_action(DynamicFhr(), 0)
