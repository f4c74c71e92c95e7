import time

import pytest

from qdsnet.finitekey import Conventions
from qdsnet.table2 import (format_report, load_rows, reproduce_row,
                           reproduce_table, row_inputs)

# the two rows whose published rate cell cannot be met at our
# reproduced length; see the reproduce-table report and README
KNOWN_RATE_OUTLIERS = {"50km A-C", "200km A-C"}
# rows whose published rate cell disagrees with its own row identity
KNOWN_INCONSISTENT_CELLS = {"50km A-B", "200km A-B"}


def test_load_rows_complete():
    rows = load_rows()
    assert len(rows) == 8
    names = {f"{r['distance_km']}km {r['link']}" for r in rows}
    assert names == {f"{d}km {l}" for d in (50, 100, 150, 200)
                     for l in ("A-B", "A-C")}
    for row in rows:
        assert row["tally"]["n_z_total"] == 10_000_000
        assert set(row["published"]) >= {"s_z1_l", "e_z_percent",
                                         "phi_z_u", "signature_len_bits",
                                         "eps", "signature_rate_tps"}


def test_row_inputs_types():
    tally, intensity, targets = row_inputs(load_rows()[0])
    assert tally.n_z_total == 10_000_000
    assert 0 < intensity.nu < intensity.mu
    assert targets.eps_sf == 1e-10
    assert targets.message_len_bits == 1_000_000
    assert targets.lambda_ec_bits is not None


def test_reproduction_runs_under_ten_seconds():
    start = time.monotonic()
    reproduce_table()
    assert time.monotonic() - start < 10.0


def _name(row):
    return f"{row['distance_km']}km {row['link']}"


def test_all_analysis_cells_within_tolerance():
    result = reproduce_table()
    assert len(result["rows"]) == 8
    for row in result["rows"]:
        checks = row["checks"]
        for cell in ("e_z", "s_z1_l", "phi_z_u", "signature_len_bits",
                     "eps"):
            assert checks[cell]["pass"], (_name(row), cell)


def test_rate_cells_match_documented_state():
    result = reproduce_table()
    failed = {_name(r) for r in result["rows"] if not r["row_pass"]}
    assert failed == KNOWN_RATE_OUTLIERS
    flagged = {_name(r) for r in result["rows"] if r["flags"]}
    assert flagged >= KNOWN_INCONSISTENT_CELLS
    assert result["all_pass"] is False
    # when any row fails, the alternative conventions must be on record
    alts = result["alternatives_evaluated"]
    assert len(alts) == 4
    best = min(alts, key=lambda a: a["rows_failed"])
    assert best["log_base"] == "e"
    assert best["vacuum_upper_intensity"] == "nu"
    assert best["rows_failed"] == 2


def test_no_convention_does_better():
    result = reproduce_table()
    ours = sum(1 for r in result["rows"] if not r["row_pass"])
    for alt in result["alternatives_evaluated"]:
        assert alt["rows_failed"] >= ours


def test_reproduce_row_shape():
    row = load_rows()[2]
    out = reproduce_row(row)
    assert set(out["checks"]) == {
        "e_z", "s_z1_l", "phi_z_u", "signature_len_bits", "eps",
        "signature_rate_tps"}
    for cell in out["checks"].values():
        assert "computed" in cell and "published" in cell


def test_alternative_convention_degrades():
    bad = reproduce_table(Conventions(log_base="2",
                                      vacuum_upper_intensity="mu"))
    good = reproduce_table()
    n_bad = sum(1 for r in bad["rows"] if not r["row_pass"])
    n_good = sum(1 for r in good["rows"] if not r["row_pass"])
    assert n_bad > n_good


def test_format_report_readable():
    result = reproduce_table()
    text = format_report(result)
    for row in result["rows"]:
        assert _name(row) in text
    assert "rows passing: 6/8" in text
