"""Reproduction of the bundled reference measurements (golden data).

Eight recorded link datasets ship with the package: raw detection
counts, source settings, and the originally published derived values
(single-photon bound, error rates, signature length, security bound,
signature rate).  reproduce_table re-derives every output column from
the raw counts alone and compares against the published cells at fixed
tolerances:

    E_Z        exact at the printed precision (a ratio of integers)
    s_Z1_l     within 2 percent
    phi_Z_u    within 15 percent
    L          within 10 percent, band rounded up to multiples of 8
    eps        within a factor of 3, evaluated at the reproduced L
    R_S        within 2 percent (plus half a printed ulp)

R_S target selection: the published rate cell is compared against the
rate identity n_Z / (2 L t) evaluated at the published L and t.  Two of
the eight cells disagree with their own row's identity by about 5
percent; for those rows the identity-consistent value replaces the cell
as the comparison target and the row is flagged.  Every failure also
triggers an evaluation of the analyzer's convention alternatives
(logarithm base, which intensity bounds the vacuum estimate) so the
report shows whether any alternative convention would have rescued the
row.
"""

from __future__ import annotations

import json
import math
from importlib import resources

from .finitekey import (Conventions, DEFAULT_CONVENTIONS, DetectionTally,
                        IntensityConfig, SecurityTargets, link_bounds,
                        min_signature_length, signature_rate)

ROW_FILES = (
    "table2_50km_AB.json", "table2_50km_AC.json",
    "table2_100km_AB.json", "table2_100km_AC.json",
    "table2_150km_AB.json", "table2_150km_AC.json",
    "table2_200km_AB.json", "table2_200km_AC.json",
)

S_Z1_RTOL = 0.02
PHI_RTOL = 0.15
L_RTOL = 0.10
EPS_FACTOR = 3.0
RS_RTOL = 0.02
# a published cell whose own rate identity misses it by more than this
# is treated as internally inconsistent and flagged
RS_CELL_CONSISTENCY_RTOL = 0.02


def load_rows() -> list[dict]:
    rows = []
    for name in ROW_FILES:
        ref = resources.files("qdsnet.data").joinpath(name)
        rows.append(json.loads(ref.read_text()))
    return rows


def _printed_ulp(text: str) -> float:
    """Half-open quantization step of a printed decimal like '6.46e-2'."""
    mant = text.lower().split("e")[0]
    exp = int(text.lower().split("e")[1]) if "e" in text.lower() else 0
    decimals = len(mant.split(".")[1]) if "." in mant else 0
    return 10.0 ** (exp - decimals)


def _ceil8(x: float) -> int:
    return int(math.ceil(x / 8.0)) * 8


def row_inputs(row: dict) -> tuple[DetectionTally, IntensityConfig,
                                   SecurityTargets]:
    tally = DetectionTally(**row["tally"])
    intensity = IntensityConfig(**row["intensity"])
    targets = SecurityTargets(**row["targets"])
    return tally, intensity, targets


def reproduce_row(row: dict,
                  conv: Conventions = DEFAULT_CONVENTIONS) -> dict:
    """Recompute one row's outputs and judge every cell."""
    tally, intensity, targets = row_inputs(row)
    pub = row["published"]

    bounds = link_bounds(tally, intensity, targets, conv=conv)
    length, report = min_signature_length(tally, intensity, targets, conv)

    t_s = float(pub["accumulation_time_s"])
    n_z = tally.n_z_total
    rate = signature_rate(n_z, length, t_s)

    checks: dict[str, dict] = {}

    pub_ez = float(pub["e_z_percent"])
    ez_pct = 100.0 * tally.e_z
    checks["e_z"] = {
        "computed": ez_pct, "published": pub_ez,
        "pass": abs(ez_pct - pub_ez) <= 0.5 * _printed_ulp(pub["e_z_percent"]),
    }

    pub_s1 = float(pub["s_z1_l"])
    checks["s_z1_l"] = {
        "computed": report.s_z1_l, "published": pub_s1,
        "deviation": report.s_z1_l / pub_s1 - 1.0,
        "pass": abs(report.s_z1_l / pub_s1 - 1.0) <= S_Z1_RTOL,
    }

    pub_phi = float(pub["phi_z_u"])
    checks["phi_z_u"] = {
        "computed": report.phi_z_u, "published": pub_phi,
        "deviation": report.phi_z_u / pub_phi - 1.0,
        "pass": abs(report.phi_z_u / pub_phi - 1.0) <= PHI_RTOL,
    }

    pub_L = int(pub["signature_len_bits"])
    lo, hi = _ceil8((1 - L_RTOL) * pub_L), _ceil8((1 + L_RTOL) * pub_L)
    checks["signature_len_bits"] = {
        "computed": length, "published": pub_L, "band": [lo, hi],
        "deviation": length / pub_L - 1.0,
        "pass": lo <= length <= hi,
    }

    pub_eps = float(pub["eps"])
    eps_ratio = report.eps / pub_eps if pub_eps else math.inf
    checks["eps"] = {
        "computed": report.eps, "published": pub_eps, "ratio": eps_ratio,
        "pass": 1.0 / EPS_FACTOR <= eps_ratio <= EPS_FACTOR,
    }

    # rate cell: check the published cell against its own row's identity
    pub_rs = float(pub["signature_rate_tps"])
    rs_ulp = _printed_ulp(pub["signature_rate_tps"])
    identity_rs = signature_rate(n_z, pub_L, t_s)
    cell_consistent = (abs(identity_rs / pub_rs - 1.0)
                       <= RS_CELL_CONSISTENCY_RTOL)
    target_rs = pub_rs if cell_consistent else identity_rs
    allowance = RS_RTOL * target_rs + (0.5 * rs_ulp if cell_consistent
                                       else 0.0)
    checks["signature_rate_tps"] = {
        "computed": rate, "published": pub_rs,
        "cell_consistent_with_rate_identity": cell_consistent,
        "identity_value_at_published_L": identity_rs,
        "target": target_rs,
        "deviation": rate / target_rs - 1.0,
        "pass": abs(rate - target_rs) <= allowance,
        "flagged": not cell_consistent,
    }

    return {
        "distance_km": row["distance_km"], "link": row["link"],
        "checks": checks,
        "row_pass": all(c["pass"] for c in checks.values()),
        "flags": (["published rate cell differs from its own row's "
                   "n_Z/(2Lt) identity; identity value used as target"]
                  if not cell_consistent else []),
    }


def _alternative_summary(rows: list[dict]) -> list[dict]:
    """Failure counts for every analyzer convention combination."""
    out = []
    for log_base in ("e", "2"):
        for vac in ("nu", "mu"):
            conv = Conventions(log_base=log_base,
                               vacuum_upper_intensity=vac)
            failed = []
            for row in rows:
                try:
                    res = reproduce_row(row, conv)
                except Exception:
                    failed.append(f"{row['distance_km']}km {row['link']} "
                                  "(analysis error)")
                    continue
                if not res["row_pass"]:
                    failed.append(f"{row['distance_km']}km {row['link']}")
            out.append({"log_base": log_base,
                        "vacuum_upper_intensity": vac,
                        "rows_failed": len(failed), "failures": failed})
    return out


def reproduce_table(conv: Conventions = DEFAULT_CONVENTIONS) -> dict:
    """Recompute all rows; on any failure, also evaluate alternatives."""
    rows = load_rows()
    results = [reproduce_row(row, conv) for row in rows]
    all_pass = all(r["row_pass"] for r in results)
    report = {"rows": results, "all_pass": all_pass,
              "convention": {"log_base": conv.log_base,
                             "vacuum_upper_intensity":
                                 conv.vacuum_upper_intensity}}
    if not all_pass:
        report["alternatives_evaluated"] = _alternative_summary(rows)
    return report


def _fmt(value: float) -> str:
    if value == 0:
        return "0"
    if abs(value) >= 1e4 or abs(value) < 1e-2:
        return f"{value:.3e}"
    return f"{value:.4g}"


def format_report(result: dict) -> str:
    """Human-readable side-by-side comparison."""
    lines = []
    header = (f"{'row':<12} {'cell':<22} {'computed':>12} {'published':>12} "
              f"{'dev':>8}  verdict")
    lines.append(header)
    lines.append("-" * len(header))
    for row in result["rows"]:
        tag = f"{row['distance_km']}km {row['link']}"
        for cell, chk in row["checks"].items():
            dev = chk.get("deviation")
            if dev is None and "ratio" in chk:
                dev = chk["ratio"] - 1.0
            devs = f"{100*dev:+.2f}%" if dev is not None else ""
            verdict = "pass" if chk["pass"] else "FAIL"
            if chk.get("flagged"):
                verdict += " [flagged cell]"
            lines.append(f"{tag:<12} {cell:<22} {_fmt(chk['computed']):>12} "
                         f"{_fmt(chk['published']):>12} {devs:>8}  {verdict}")
        for flag in row["flags"]:
            lines.append(f"{'':<12} note: {flag}")
    lines.append("")
    n_fail = sum(1 for r in result["rows"] if not r["row_pass"])
    lines.append(f"rows passing: {len(result['rows']) - n_fail}"
                 f"/{len(result['rows'])}")
    if "alternatives_evaluated" in result:
        lines.append("")
        lines.append("analyzer convention alternatives "
                     "(rows failed under each):")
        for alt in result["alternatives_evaluated"]:
            lines.append(f"  log_base={alt['log_base']:<2} "
                         f"vacuum_upper={alt['vacuum_upper_intensity']:<3} "
                         f"-> {alt['rows_failed']} rows failed")
    return "\n".join(lines)
