from __future__ import annotations

import pytest

from carbontax.model import SENSITIVITY_PRESETS
from carbontax.reference import (
    MEAN_ROW_LABELS,
    PRESETS_WITH_REFERENCE,
    SCENARIO_COLUMNS,
    STD_ROW_LABELS,
    WELFARE_ROWS,
    reference_table,
)


def test_every_preset_has_both_tables():
    assert set(PRESETS_WITH_REFERENCE) == {"baseline", *SENSITIVITY_PRESETS}
    for preset in PRESETS_WITH_REFERENCE:
        means = reference_table("means", preset)
        stds = reference_table("stds", preset)
        assert len(means.cells) == 15 * 5
        assert len(stds.cells) == 9 * 5
        assert set(means.variables) == set(MEAN_ROW_LABELS)
        assert set(stds.variables) == set(STD_ROW_LABELS)


@pytest.mark.parametrize(
    "preset, means_tag, stds_tag",
    [
        ("baseline", "Table 2", "Table 3"),
        ("gamma_low", "Table A.1", "Table A.2"),
        ("gamma_high", "Table A.4", "Table A.5"),
        ("theta1_high", "Table A.7", "Table A.8"),
        ("sigma_low", "Table A.10", "Table A.11"),
        ("chi_high", "Table A.13", "Table A.14"),
        ("eps_high", "Table A.16", "Table A.17"),
    ],
)
def test_source_tags(preset, means_tag, stds_tag):
    assert all(c.source == means_tag for c in reference_table("means", preset).cells)
    assert all(c.source == stds_tag for c in reference_table("stds", preset).cells)


def test_spot_values():
    m = reference_table("means", "baseline")
    assert m.get("bau", "Y").value == 1.002
    assert m.get("unconstrained", "tau").value == 0.020
    assert m.get("unconstrained", "X").value == 321.79
    assert m.get("constrained:gamma", "Wel").value == -77.856
    assert m.get("bau", "US").value == -77.078
    s = reference_table("stds", "baseline")
    assert s.get("bau", "lamH").value == 12.86
    assert reference_table("stds", "gamma_low").get("constrained:1", "lamH").value == 44.57
    assert s.get("constrained:1", "tau").value == 13.06
    assert s.get("bau", "tau").value == 0.0 and s.get("unconstrained", "lamH").value == 0.0
    assert reference_table("means", "theta1_high").get("constrained:1", "Wel").value == -90.418
    assert reference_table("means", "chi_high").get("unconstrained", "tau").value == 0.045
    assert reference_table("stds", "eps_high").get("unconstrained", "I").value == 5.23


def test_printed_precision_is_kept():
    m = reference_table("means", "baseline")
    assert m.get("unconstrained", "tau").decimals == 3
    assert m.get("unconstrained", "tau").half_unit == pytest.approx(5e-4)
    assert m.get("bau", "X").decimals == 2


def test_welfare_view():
    w = reference_table("welfare", "baseline")
    assert set(w.variables) == set(WELFARE_ROWS)
    assert {c.scenario for c in w.cells} == set(SCENARIO_COLUMNS)


def test_missing_tables():
    with pytest.raises(KeyError):
        reference_table("means", "nope")
    with pytest.raises(KeyError):
        reference_table("skewness", "baseline")
    with pytest.raises(KeyError):
        reference_table("means", "baseline").get("bau", "Q")


def test_row_labels_follow_printed_names():
    assert MEAN_ROW_LABELS["Y"] == "Y_t"
    assert MEAN_ROW_LABELS["tau"] == "tau*_t"
    assert STD_ROW_LABELS["Y"] == "log(Y_t)"
    assert STD_ROW_LABELS["lamH"] == "log(lambda^H_t)"
