import io
import math

import pytest
from hypothesis import given, strategies as st

from covariation.corpus import Displacement, Gender, SpeakerMetadata, TimeInProgram
from covariation.inventory import ABSENT, ARTICLE, Variable
from covariation.profiles import (HIGH, LOW, MEDIUM, VariableStats, application_map, categorize_binary,
                                  categorize_ternary, compute_profiles, empirical_log_odds,
                                  export_profiles, pooled_rates, read_profiles)
from covariation.variables import Observation


def obs(speaker, var, variant):
    return Observation(0, "f", speaker, var, variant, (), (), ())


def test_application_rate():
    data = [obs("S1", Variable.PRO2P, v) for v in ("você", "você", "você", "tu")]
    (p,) = compute_profiles(data)
    assert p[Variable.PRO2P] == VariableStats(3, 4)
    assert p.value(Variable.PRO2P) == pytest.approx(0.75)


def test_default_application_values():
    data = [obs("S", Variable.DET_POSS, ABSENT), obs("S", Variable.DET_POSS, ARTICLE),
            obs("S", Variable.CLIT2P, "te"), obs("S", Variable.POSS2P, "seu"), obs("S", Variable.PRO2P, "cê")]
    (p,) = compute_profiles(data)
    assert [p[v].app_count for v in Variable] == [1, 0, 1, 1]


def test_application_override():
    data = [obs("S", Variable.PRO2P, "cê"), obs("S", Variable.PRO2P, "você")]
    (p,) = compute_profiles(data, app_map={Variable.PRO2P: "cê"})
    assert p[Variable.PRO2P].app_count == 1
    with pytest.raises(ValueError):
        application_map({Variable.PRO2P: "vós"})


@pytest.mark.parametrize("a, n, expected", [
    (5, 10, 0.0),
    (10, 10, math.log(21)),
    (0, 10, -math.log(21)),
    (0, 0, 0.0),
    (1, 3, math.log(1.5 / 2.5)),
])
def test_log_odds_examples(a, n, expected):
    assert empirical_log_odds(a, n) == pytest.approx(expected, abs=1e-12)


def test_log_odds_rejects_bad_counts():
    with pytest.raises(ValueError):
        empirical_log_odds(4, 3)


@given(st.integers(1, 500), st.data())
def test_log_odds_monotone_and_symmetric(n, data):
    a = data.draw(st.integers(0, n))
    lo = empirical_log_odds(a, n)
    assert math.isfinite(lo)
    assert lo == pytest.approx(-empirical_log_odds(n - a, n))
    if a < n:
        assert empirical_log_odds(a + 1, n) > lo


@pytest.mark.parametrize("rate, ternary, binary", [
    (0.0, LOW, LOW), (0.399, LOW, LOW), (0.40, MEDIUM, LOW), (0.5, MEDIUM, HIGH),
    (0.60, MEDIUM, HIGH), (0.601, HIGH, HIGH), (1.0, HIGH, HIGH),
])
def test_category_boundaries(rate, ternary, binary):
    assert categorize_ternary(rate) == ternary
    assert categorize_binary(rate) == binary


def test_metadata_speaker_without_observations():
    meta = [SpeakerMetadata("S0", Displacement.D1, Gender.F, None, TimeInProgram.EARLY)]
    profiles = compute_profiles([obs("S1", Variable.PRO2P, "tu")], metadata=meta)
    assert [p.speaker_id for p in profiles] == ["S0", "S1"]
    s0 = profiles[0]
    assert not s0.has_all_data
    assert all(not s0[v].has_data and s0.value(v) == 0.0 and s0.value(v, "log_odds") == 0.0 for v in Variable)


def test_unknown_measure():
    (p,) = compute_profiles([obs("S", Variable.PRO2P, "tu")])
    with pytest.raises(ValueError):
        p.value(Variable.PRO2P, "odds")


def test_pooled_rates():
    rates = pooled_rates({Variable.CLIT2P: {"te": 3, "lhe": 1}, Variable.POSS2P: {}})
    assert rates[Variable.CLIT2P] == {"te": 0.75, "lhe": 0.25}
    assert rates[Variable.POSS2P] == {}


def test_profile_table_round_trip():
    data = [obs("S2", Variable.PRO2P, "você"), obs("S1", Variable.CLIT2P, "lhe"),
            obs("S1", Variable.CLIT2P, "te"), obs("S1", Variable.POSS2P, "seu")]
    profiles = compute_profiles(data)
    buf = io.StringIO()
    export_profiles(profiles, buf)
    header = buf.getvalue().splitlines()[0].split(",")
    assert "Clit2P_rate" in header and "Poss2P_ternary" in header
    back = read_profiles(io.StringIO(buf.getvalue()))
    assert [p.speaker_id for p in back] == ["S1", "S2"]
    for a, b in zip(profiles, back):
        assert all(a[v] == b[v] for v in Variable)


def test_profile_table_missing_columns():
    with pytest.raises(ValueError, match="Pro2P_app_count"):
        read_profiles(io.StringIO("speaker_id,DetPoss_app_count\nS,1\n"))
