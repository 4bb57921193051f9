import json
import math

import numpy as np
import pytest

from laborsim.coarse import consistency_profile, forward_occupancy
from laborsim.dataset import read_dataset, write_dataset
from laborsim.datagen import (
    fhr_category_codes,
    generate_dataset,
    generate_trajectories,
    positivity_report,
    stratum_codes,
)
from laborsim.errors import ConfigError, DataFormatError
from laborsim.policy import never_cesarean_policy
from laborsim.regimes import ImmediateCesarean, NaturalCourse, VaginalOnly


class TestGenerate:
    def test_same_seed_identical(self, coarse_cfg, continuous_cfg, policy):
        for cfg in (coarse_cfg, continuous_cfg):
            a = generate_dataset(200, cfg, policy, seed=5)
            b = generate_dataset(200, cfg, policy, seed=5)
            assert a == b
        assert generate_dataset(1, coarse_cfg, policy, seed=5) == \
            generate_dataset(1, coarse_cfg, policy, seed=5)

    def test_n_zero_rejected(self, coarse_cfg, policy):
        with pytest.raises(ConfigError):
            generate_dataset(0, coarse_cfg, policy, seed=1)

    def test_never_cesarean_all_zero(self, coarse_cfg):
        ds = generate_dataset(2000, coarse_cfg, never_cesarean_policy(), seed=9)
        assert (ds.cols["a"] == 0).all()

    def test_validates(self, coarse_cfg, continuous_cfg, policy):
        for cfg in (coarse_cfg, continuous_cfg):
            generate_dataset(500, cfg, policy, seed=3).validate()
            generate_trajectories(100, cfg, policy, seed=3).validate()

    def test_cesarean_incidence_matches_dp(self, coarse_cfg, policy, kernel):
        n = 100_000
        ds = generate_dataset(n, coarse_cfg, policy, seed=42)
        occ = forward_occupancy(kernel, coarse_cfg.horizon, policy.cell_probs)
        expected = occ["cum_cesarean"][-1]
        observed = np.mean([ds.cols["a"][sl][-1] for sl in ds.person_slices()])
        se = math.sqrt(expected * (1 - expected) / n)
        assert abs(observed - expected) <= 3 * se

    def test_vectorized_matches_scalar_marginals(self, coarse_cfg, policy):
        big = generate_dataset(50_000, coarse_cfg, policy, seed=8)
        small = generate_trajectories(3_000, coarse_cfg, policy, seed=80)

        def final_marginals(ds):
            rows = ds.person_slices()
            return np.array([[ds.cols[c][sl][-1] for c in ("y", "a", "born")]
                             for sl in rows]).mean(axis=0)

        mb, ms = final_marginals(big), final_marginals(small)
        se = np.sqrt(0.25 / 3_000)
        assert (np.abs(mb - ms) <= 4 * se).all(), (mb, ms)


class TestRoundTrip:
    def test_exact_round_trip(self, coarse_cfg, continuous_cfg, policy, tmp_path):
        for cfg in (coarse_cfg, continuous_cfg):
            ds = generate_dataset(300, cfg, policy, seed=77)
            path = tmp_path / f"{cfg.mode}.jsonl"
            write_dataset(ds, str(path))
            assert read_dataset(str(path)) == ds

    def test_columns_and_categories_in_file(self, coarse_cfg, policy, tmp_path):
        ds = generate_dataset(5, coarse_cfg, policy, seed=1)
        path = tmp_path / "ds.jsonl"
        write_dataset(ds, str(path))
        first = json.loads(path.read_text().splitlines()[0])
        assert list(first) == ["person_id", "k", "maternal_age", "parity",
                               "history_preterm", "fhr", "brady_persist", "dilatation",
                               "sbp", "dbp", "a", "z", "y", "born"]
        assert first["fhr"] in ("normal", "bradycardia-transient",
                                "bradycardia-persistent", "tachycardia")
        assert first["sbp"] in ("normal", "high")


def _rows_fixture(coarse_cfg, policy, tmp_path, mutate):
    ds = generate_dataset(20, coarse_cfg, policy, seed=4)
    path = tmp_path / "ds.jsonl"
    write_dataset(ds, str(path))
    lines = [json.loads(line) for line in path.read_text().splitlines()]
    lines = mutate(lines)
    path2 = tmp_path / "mutated.jsonl"
    path2.write_text("\n".join(json.dumps(r) for r in lines) + "\n")
    return str(path2)


class TestIngestionErrors:
    def test_decreasing_a_named(self, coarse_cfg, policy, tmp_path):
        def mutate(lines):
            # set a=1 on a first row whose person has later rows with a=0
            for i, row in enumerate(lines):
                if row["k"] == 0 and i + 1 < len(lines) and lines[i + 1]["k"] == 1:
                    lines[i] = dict(row, a=1)
                    break
            return lines
        path = _rows_fixture(coarse_cfg, policy, tmp_path, mutate)
        with pytest.raises(DataFormatError) as err:
            read_dataset(path)
        assert "person" in str(err.value) and "hour" in str(err.value)
        assert "decreased" in str(err.value)

    def test_missing_hour_gap_named(self, coarse_cfg, policy, tmp_path):
        def mutate(lines):
            # delete the k=2 row of the first person that has one
            for i, row in enumerate(lines):
                if row["k"] == 2:
                    del lines[i]
                    break
            return lines
        path = _rows_fixture(coarse_cfg, policy, tmp_path, mutate)
        with pytest.raises(DataFormatError, match="gap"):
            read_dataset(path)

    def test_duplicate_hour_named(self, coarse_cfg, policy, tmp_path):
        def mutate(lines):
            return lines[:1] + lines
        path = _rows_fixture(coarse_cfg, policy, tmp_path, mutate)
        with pytest.raises(DataFormatError, match="duplicate"):
            read_dataset(path)

    def test_unknown_column_rejected_with_row(self, coarse_cfg, policy, tmp_path):
        def mutate(lines):
            lines[3] = dict(lines[3], zodiac="aries")
            return lines
        path = _rows_fixture(coarse_cfg, policy, tmp_path, mutate)
        with pytest.raises(DataFormatError, match="row 4"):
            read_dataset(path)

    def test_mixed_modes_rejected(self, coarse_cfg, continuous_cfg, policy, tmp_path):
        a = generate_dataset(3, coarse_cfg, policy, seed=1)
        b = generate_dataset(3, continuous_cfg, policy, seed=1)
        pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_dataset(a, str(pa))
        write_dataset(b, str(pb))
        mixed = tmp_path / "mixed.jsonl"
        mixed.write_text(pa.read_text() + pb.read_text())
        with pytest.raises(DataFormatError, match="mixed"):
            read_dataset(str(mixed))

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "empty.jsonl"
        p.write_text("")
        with pytest.raises(DataFormatError, match="no rows"):
            read_dataset(str(p))


class TestPositivity:
    def test_natural_course_consistent_everywhere(self, coarse_cfg, policy):
        ds = generate_dataset(5000, coarse_cfg, policy, seed=10)
        rep = positivity_report(ds, NaturalCourse(), threshold=5)
        assert (rep.n_consistent == rep.n_at_risk).all()

    def test_never_cesarean_vs_immediate_cesarean_all_flagged(self, coarse_cfg):
        ds = generate_dataset(20_000, coarse_cfg, never_cesarean_policy(), seed=11)
        rep = positivity_report(ds, ImmediateCesarean(), threshold=5)
        assert len(rep.hours) > 0
        assert rep.flagged.all()
        assert (rep.n_consistent == 0).all()
        hour1 = rep.hours == 1
        assert hour1.any() and (rep.n_consistent[hour1] == 0).all()

    def test_default_policy_consistency_matches_exact_profile(self, coarse_cfg, policy, kernel):
        n = 100_000
        ds = generate_dataset(n, coarse_cfg, policy, seed=12)
        rep = positivity_report(ds, VaginalOnly(), threshold=5)
        prof = consistency_profile(kernel, VaginalOnly(), coarse_cfg.horizon, policy.cell_probs)
        cell_strata = stratum_codes(np.array([c.fhr for c in kernel.cells]),
                                    np.array([c.dilat for c in kernel.cells]))
        for hour in range(coarse_cfg.horizon + 1):
            mask = rep.hours == hour
            if not mask.any():
                continue
            observed_total = rep.n_consistent[mask].sum()
            expected_mass = prof["consistent"][hour].sum()
            se = math.sqrt(max(expected_mass * (1 - expected_mass), 1e-12) / n) * n
            assert abs(observed_total - n * expected_mass) <= 3 * se + 1e-9, hour
            # spot-check one populated stratum
            strat = rep.strata[mask][np.argmax(rep.n_at_risk[mask])]
            exp_strat = prof["consistent"][hour][cell_strata == strat].sum()
            obs_strat = rep.n_consistent[mask][rep.strata[mask] == strat].sum()
            se_s = math.sqrt(max(exp_strat * (1 - exp_strat), 1e-12) / n) * n
            assert abs(obs_strat - n * exp_strat) <= 4 * se_s + 1e-9, (hour, strat)

    def test_csv_export(self, coarse_cfg, policy, tmp_path):
        ds = generate_dataset(500, coarse_cfg, policy, seed=2)
        rep = positivity_report(ds, VaginalOnly(), threshold=5)
        path = tmp_path / "pos.csv"
        rep.to_csv(str(path))
        header = path.read_text().splitlines()[0]
        assert header == "hour,stratum,n_at_risk,n_consistent,flagged"

    def test_continuous_strata(self, continuous_cfg, policy):
        ds = generate_dataset(2000, continuous_cfg, policy, seed=6)
        codes = fhr_category_codes(ds)
        assert set(np.unique(codes)) <= {0, 1, 2, 3}
        rep = positivity_report(ds, VaginalOnly(), threshold=5)
        assert len(rep.hours) > 0
