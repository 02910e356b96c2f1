import math
import random
from datetime import date

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_record, months
from regsom import register
from regsom.errors import DataError
from regsom.register import (DAYS_PER_MONTH, DAYS_PER_YEAR, FeatureVector,
                             bracket_code, bracketize, build_features,
                             collate, compute_class_means, impute_hours,
                             summarize_occasional)


def test_collate_sums_durations_across_records():
    records = [
        make_record(entry="1993-08-01", exit="1993-11-09"),   # 100 days
        make_record(entry="1994-01-01", exit="1994-07-20"),   # 200 days
        make_record(entry="1995-01-01", exit="1995-02-20"),   # 50 days
    ]
    (ind,) = collate(records)
    assert ind.n_periods == 3
    assert ind.cumulated_duration_days == 350
    assert ind.latest_duration_days == 50


def test_collate_single_record_identity():
    rec = make_record(entry="1994-01-01", exit="1994-06-30", offers=3,
                      age=41.5, skill="cadr")
    (ind,) = collate([rec])
    assert ind.n_periods == 1
    assert ind.cumulated_duration_days == ind.latest_duration_days == 180
    assert ind.total_job_offers == 3
    assert ind.age == 41.5
    assert ind.skill == "cadr"


def test_collate_table1_style_single_registration_fraction():
    # 100 persons scaled to the Rhone ratio: 66 single, 34 double
    records = []
    for i in range(66):
        records.append(make_record(person_id=f"s{i:03d}"))
    for i in range(34):
        records.append(make_record(person_id=f"d{i:03d}",
                                   entry="1993-09-01", exit="1994-03-01"))
        records.append(make_record(person_id=f"d{i:03d}",
                                   entry="1994-06-01", exit="1995-01-01"))
    individuals = collate(records)
    assert len(individuals) == 100
    single = sum(1 for ind in individuals if ind.n_periods == 1)
    assert single / len(individuals) == pytest.approx(0.66)


def test_collate_rejects_overlapping_spells():
    records = [
        make_record(person_id="bad", entry="1994-01-01", exit="1994-06-30"),
        make_record(person_id="bad", entry="1994-05-01", exit="1994-12-31"),
        make_record(person_id="fine"),
    ]
    with pytest.raises(DataError, match="bad"):
        collate(records)


def test_collate_open_spell_measured_to_window_end():
    rec = make_record(entry="1996-01-01", exit=None, exit_type="none")
    (ind,) = collate([rec], window_end=date(1996, 8, 31))
    assert ind.latest_duration_days == 243


def test_collate_qualitative_from_latest_record():
    records = [
        make_record(entry="1993-08-01", exit="1993-12-01", skill="mano",
                    age=25.0),
        make_record(entry="1995-08-01", exit="1995-12-01", skill="tecd",
                    age=27.0),
    ]
    (ind,) = collate(records)
    assert ind.skill == "tecd"
    assert ind.age == 27.0


def test_collate_latest_hours_and_wage_come_from_latest_spell():
    records = [
        make_record(entry="1993-08-01", exit="1994-02-01",
                    occasional=months((120, 900, 1)), hour_range="gt78"),
        make_record(entry="1995-01-01", exit="1995-06-01"),
    ]
    (ind,) = collate(records)
    # all-history totals keep the early casual work, the level does not
    assert ind.total_occasional_months == 1
    assert ind.total_occasional_spells == 1
    assert ind.max_monthly_hours == 0
    assert ind.max_monthly_wage == 0


@settings(max_examples=25, deadline=None)
@given(st.randoms(use_true_random=False))
def test_collate_permutation_invariant(rnd):
    records = []
    for i in range(8):
        records.append(make_record(person_id=f"a{i}", entry="1993-08-01",
                                   exit="1994-02-01"))
        records.append(make_record(person_id=f"a{i}", entry="1994-06-01",
                                   exit="1995-01-01",
                                   occasional=months((40, 300, 1))))
    base = collate(records)
    shuffled = records[:]
    rnd.shuffle(shuffled)
    assert collate(shuffled) == base


def test_impute_substitutes_class_mean():
    rec = make_record(hour_range="gt78",
                      occasional=months((None, 700, 1), (80, 650, 1),
                                        (None, 700, 1)))
    fixed, n = impute_hours(rec, {("gt78", "nord"): 95.0})
    assert n == 2
    assert [m.hours for m in fixed.occasional] == [95.0, 80.0, 95.0]


def test_impute_identity_when_complete():
    rec = make_record(occasional=months((40, 300, 1)))
    fixed, n = impute_hours(rec, {})
    assert n == 0
    assert fixed is rec


def test_impute_uses_population_class_means():
    population = [
        make_record(person_id="a", hour_range="le78",
                    occasional=months((30, 200, 1))),
        make_record(person_id="b", hour_range="le78",
                    occasional=months((50, 320, 1))),
        make_record(person_id="c", hour_range="le78",
                    occasional=months((None, 250, 1))),
    ]
    class_means = compute_class_means(population)
    assert class_means[("le78", "nord")] == pytest.approx(40.0)
    fixed, n = impute_hours(population[2], class_means)
    assert n == 1
    assert fixed.occasional[0].hours == pytest.approx(40.0)


def test_impute_missing_class_mean_names_class():
    rec = make_record(hour_range="le78", occasional=months((None, 250, 1)))
    with pytest.raises(DataError, match="le78"):
        impute_hours(rec, {("gt78", "nord"): 95.0})


def test_impute_never_changes_observed_values():
    rec = make_record(hour_range="gt78",
                      occasional=months((81.25, 700, 1), (None, 700, 1)))
    fixed, _ = impute_hours(rec, {("gt78", "nord"): 95.0})
    assert fixed.occasional[0].hours == 81.25
    assert fixed.occasional[0].wage == 700


def test_summarize_basic():
    rec = make_record(occasional=months((120, 900, 1), (118, 950, 1),
                                        (119, 910, 1)))
    s = summarize_occasional(rec)
    assert s == {"max_hours": 120, "max_wage": 950, "months_count": 3,
                 "spells_count": 1}


def test_summarize_empty():
    s = summarize_occasional(make_record())
    assert s == {"max_hours": 0.0, "max_wage": 0.0, "months_count": 0,
                 "spells_count": 0}


def test_summarize_two_spells():
    rec = make_record(occasional=months((40, 280, 1), (40, 280, 1),
                                        (80, 560, 2)))
    s = summarize_occasional(rec)
    assert s["max_hours"] == 80
    assert s["months_count"] == 3
    assert s["spells_count"] == 2


def test_features_share_ratio():
    # 6 occasional months over ~24 unemployment months
    days = 24 * DAYS_PER_MONTH
    ind = register.Individual(
        person_id="x", n_periods=1, cumulated_duration_days=days,
        latest_duration_days=days, total_occasional_months=6,
        total_occasional_spells=1, total_job_offers=0, max_monthly_hours=80,
        max_monthly_wage=600, reason="end_of_contract", exit_type="job",
        education="secondary", skill="empq", children=0, age=30, seniority=2)
    feat = build_features(ind)
    assert feat.occasional_months_per_unemp_month == pytest.approx(0.25)
    assert feat.occasional_spells_per_year == pytest.approx(
        1 / (days / DAYS_PER_YEAR))


def test_features_spells_per_period():
    ind = register.Individual(
        person_id="x", n_periods=2, cumulated_duration_days=400,
        latest_duration_days=150, total_occasional_months=3,
        total_occasional_spells=2, total_job_offers=2, max_monthly_hours=50,
        max_monthly_wage=400, reason="lay_off", exit_type="quit",
        education="none", skill="mano", children=2, age=45, seniority=10)
    feat = build_features(ind)
    assert feat.occasional_spells_per_period == 1.0
    # exact integer relation, not just approximate
    assert feat.occasional_spells_per_period * ind.n_periods \
        == ind.total_occasional_spells


def test_features_zero_duration_rejected():
    ind = register.Individual(
        person_id="x", n_periods=1, cumulated_duration_days=0,
        latest_duration_days=0, total_occasional_months=0,
        total_occasional_spells=0, total_job_offers=0, max_monthly_hours=0,
        max_monthly_wage=0, reason="na", exit_type="none",
        education="none", skill="mano", children=0, age=20, seniority=0)
    with pytest.raises(DataError, match="degenerate"):
        build_features(ind)


def test_features_single_record_matches_direct_computation():
    rec = make_record(entry="1994-01-01", exit="1995-01-01", offers=2,
                      occasional=months((90, 700, 1), (95, 740, 1)))
    (ind,) = collate([rec])
    feat = build_features(ind)
    days = 365.0
    assert feat.latest_duration == days
    assert feat.cumulated_duration == days
    assert feat.offers_per_month == 2 / (days / DAYS_PER_MONTH)
    assert feat.occasional_months_per_unemp_month == 2 / (days / DAYS_PER_MONTH)
    assert feat.max_hours == 95
    assert feat.max_wage == 740


def _profile_for(feature_kwargs, individual_kwargs=None, super_class=1):
    base = dict(age=30.0, seniority=2.0, latest_duration=200.0,
                cumulated_duration=300.0, offers_per_month=0.1, n_periods=1.0,
                occasional_months_per_unemp_month=0.0,
                occasional_spells_per_year=0.0,
                occasional_spells_per_period=0.0, max_hours=0.0, max_wage=0.0)
    base.update(feature_kwargs)
    feat = FeatureVector(**base)
    ind_kw = dict(person_id="x", n_periods=int(base["n_periods"]),
                  cumulated_duration_days=base["cumulated_duration"],
                  latest_duration_days=base["latest_duration"],
                  total_occasional_months=0, total_occasional_spells=0,
                  total_job_offers=0, max_monthly_hours=base["max_hours"],
                  max_monthly_wage=base["max_wage"],
                  reason="end_of_contract", exit_type="job",
                  education="secondary", skill="empq", children=0,
                  age=base["age"], seniority=base["seniority"])
    ind_kw.update(individual_kwargs or {})
    return bracketize(register.Individual(**ind_kw), feat, super_class)


def test_bracketize_duration_over_12_months():
    prof = _profile_for({"latest_duration": 400.0})
    assert prof.duration == "sup12"  # 400 / 30.44 > 12


def test_bracketize_hours_boundary_belongs_to_lower_bracket():
    assert _profile_for({"max_hours": 78.0}).hours == "ar78"
    assert _profile_for({"max_hours": 78.0001}).hours == "ar117"
    assert _profile_for({"max_hours": 0.0}).hours == "0ar"


def test_bracketize_share_above_30_percent():
    prof = _profile_for({"occasional_months_per_unemp_month": 0.5})
    assert prof.share == "p3par"


def test_bracketize_enum_mappings():
    prof = _profile_for({}, {"education": "s2", "reason": "first_job",
                             "exit_type": "full_time_job_seeker",
                             "children": 2})
    assert prof.education == "+bacc"
    assert prof.reason == "prem"
    assert prof.exit == "fjob"
    assert prof.children == "enf"


def test_bracketize_age_supplementary_brackets():
    assert _profile_for({"age": 25.0}).age == "m25"
    assert _profile_for({"age": 25.5}).age == "25a35"
    assert _profile_for({"age": 61.0}).age == "p55"


def test_bracketize_super_class_range_checked():
    with pytest.raises(DataError):
        _profile_for({}, super_class=11)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0, max_value=1e6, allow_nan=False),
       st.floats(min_value=0, max_value=1e6, allow_nan=False),
       st.floats(min_value=0, max_value=2.0, allow_nan=False),
       st.floats(min_value=0, max_value=50.0, allow_nan=False))
def test_bracketize_total_over_finite_values(duration, hours, share, spells):
    prof = _profile_for({"latest_duration": duration, "max_hours": hours,
                         "occasional_months_per_unemp_month": share,
                         "occasional_spells_per_year": spells})
    assert prof.duration in ("inf6", "inf12", "sup12")
    assert prof.hours in register.QUAL_CODES["hours"]
    assert prof.share in register.QUAL_CODES["share"]
    assert prof.spells_year in register.QUAL_CODES["spells_year"]


def test_bracket_code_spells_per_year_boundaries():
    assert bracket_code(1.0, ("m1peran", "12peran", "p2peran"), (1.0, 2.0),
                        zero_code="0peran") == "m1peran"
    assert bracket_code(2.0, ("m1peran", "12peran", "p2peran"), (1.0, 2.0),
                        zero_code="0peran") == "12peran"
    assert bracket_code(0.0, ("m1peran", "12peran", "p2peran"), (1.0, 2.0),
                        zero_code="0peran") == "0peran"


def test_records_roundtrip(tmp_path):
    records = [
        make_record(person_id="r1", occasional=months((None, 700.5, 1),
                                                      (80.25, 650, 2))),
        make_record(person_id="r2", entry="1995-03-01", exit=None,
                    exit_type="none"),
    ]
    path = tmp_path / "reg.csv"
    register.write_records(records, path)
    assert register.read_records(path) == records


def test_individuals_and_features_roundtrip(tmp_path):
    records = [make_record(person_id="a", offers=2,
                           occasional=months((90.125, 712.5, 1)))]
    individuals = collate(records)
    feats = [build_features(i) for i in individuals]
    ipath = tmp_path / "ind.csv"
    fpath = tmp_path / "feat.csv"
    register.write_individuals(individuals, ipath)
    register.write_features([i.person_id for i in individuals], feats, fpath)
    assert register.read_individuals(ipath) == individuals
    ids, back = register.read_features(fpath)
    assert ids == ["a"]
    assert back == feats


def test_read_records_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("nope,nope\n1,2\n")
    with pytest.raises(DataError):
        register.read_records(path)
