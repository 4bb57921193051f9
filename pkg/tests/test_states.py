import pytest

from laborsim.errors import DataFormatError
from laborsim.states import (
    BaselineCovariates,
    FHR_BRADY_PERSISTENT,
    FHR_NORMAL,
    PatientState,
    TimeVaryingCovariates,
    Trajectory,
)


def _baseline(**kw):
    defaults = dict(maternal_age=30.0, parity=1, history_preterm=False)
    defaults.update(kw)
    return BaselineCovariates(**defaults)


def _tv_cont(**kw):
    defaults = dict(fhr=140.0, brady_persist=False, dilatation=3.0, sbp=120.0, dbp=80.0)
    defaults.update(kw)
    return TimeVaryingCovariates(**defaults)


def _state(k=0, a=0, z=1, born=False, y=0, tv=None):
    return PatientState(k=k, baseline=_baseline(), tv=tv or _tv_cont(),
                        a=a, z=z, born=born, y=y)


class TestBaseline:
    def test_range_enforced(self):
        with pytest.raises(DataFormatError):
            _baseline(maternal_age=12.0)
        with pytest.raises(DataFormatError):
            _baseline(parity=9)

    def test_valid(self):
        b = _baseline(maternal_age=45.0, parity=6, history_preterm=True)
        assert b.parity == 6


class TestTimeVarying:
    def test_continuous_ranges(self):
        _tv_cont().validate("continuous")
        with pytest.raises(DataFormatError):
            _tv_cont(fhr=300.0).validate("continuous")
        with pytest.raises(DataFormatError):
            _tv_cont(dilatation=11.0).validate("continuous")

    def test_coarse_categories(self):
        tv = TimeVaryingCovariates(fhr=FHR_NORMAL, brady_persist=False,
                                   dilatation=3, sbp=0, dbp=0)
        tv.validate("coarse")
        with pytest.raises(DataFormatError):
            TimeVaryingCovariates(fhr=7, brady_persist=False,
                                  dilatation=3, sbp=0, dbp=0).validate("coarse")

    def test_coarse_persist_mirrors_category(self):
        good = TimeVaryingCovariates(fhr=FHR_BRADY_PERSISTENT, brady_persist=True,
                                     dilatation=2, sbp=0, dbp=0)
        good.validate("coarse")
        with pytest.raises(DataFormatError):
            TimeVaryingCovariates(fhr=FHR_BRADY_PERSISTENT, brady_persist=False,
                                  dilatation=2, sbp=0, dbp=0).validate("coarse")


class TestPatientState:
    def test_at_risk_consistency_forced(self):
        # z must be 1 exactly when not born and no outcome
        _state(z=1, born=False, y=0)
        _state(z=0, born=True, y=0)
        _state(z=0, born=False, y=1)
        with pytest.raises(DataFormatError):
            _state(z=0, born=False, y=0)
        with pytest.raises(DataFormatError):
            _state(z=1, born=True, y=0)

    def test_binary_fields(self):
        with pytest.raises(DataFormatError):
            _state(a=2)


class TestTrajectory:
    def test_action_count(self):
        with pytest.raises(DataFormatError):
            Trajectory(states=[_state(0)], actions=[0])

    def test_monotone_violations_rejected(self):
        s0 = _state(0, tv=_tv_cont(dilatation=4.0))
        s1_bad = _state(1, tv=_tv_cont(dilatation=3.0))
        with pytest.raises(DataFormatError, match="dilatation"):
            Trajectory(states=[s0, s1_bad], actions=[0]).validate()

    def test_gap_rejected(self):
        s0 = _state(0)
        s2 = _state(2)
        with pytest.raises(DataFormatError, match="gap"):
            Trajectory(states=[s0, s2], actions=[0]).validate()

    def test_outcome_by_is_absorbing(self):
        s0 = _state(0)
        s1 = _state(1, z=0, y=1)
        t = Trajectory(states=[s0, s1], actions=[0])
        assert t.outcome_by(1) == 1
        assert t.outcome_by(5) == 1
        assert t.outcome_by(0) == 0
