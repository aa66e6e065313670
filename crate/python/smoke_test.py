#!/usr/bin/env python3
"""Smoke test for the pfrlab Python extension.

Builds nothing itself: compile the extension first with

    cargo build -p pfr-python            # or --release

then run

    python3 python/smoke_test.py

The script locates the compiled cdylib (libpfrlab.so), stages it under
an importable name, imports it, and exercises every exposed function
with exact expected values.
"""

import shutil
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def stage_module() -> None:
    """Copy the compiled extension somewhere importable as `pfrlab`."""
    candidates = [
        REPO / "target" / "release" / "libpfrlab.so",
        REPO / "target" / "debug" / "libpfrlab.so",
        REPO / "target" / "release" / "libpfrlab.dylib",
        REPO / "target" / "debug" / "libpfrlab.dylib",
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit("extension not built; run `cargo build -p pfr-python` first")
    newest = max(built, key=lambda p: p.stat().st_mtime)
    stage = Path(tempfile.mkdtemp(prefix="pfrlab-"))
    shutil.copy2(newest, stage / "pfrlab.so")
    sys.path.insert(0, str(stage))
    print(f"using {newest}")


def frac(text: str) -> Fraction:
    return Fraction(text)


def main() -> None:
    stage_module()
    import pfrlab

    # Parameters and combinations.
    params = pfrlab.scheme_params(3, 2, 2, 2)
    assert params["v"] == 3 and params["l_tilde"] == 27 and params["l"] == 54
    assert params["rate"] == "3/5"
    combos = pfrlab.enumerate_combinations(2, 2)
    assert combos == [[1, 0], [0, 1], [1, 1]]
    assert pfrlab.achievable_rate(4, 3, 2) == "4/7"

    # Storage generators: full MDS where the field admits one, the
    # cyclic-window fallback where it does not.
    gen = pfrlab.build_generator(3, 2, 2)
    assert gen["profile"] == "mds" and gen["verified"]
    assert len(gen["rows"]) == 2 and len(gen["rows"][0]) == 3
    fallback = pfrlab.build_generator(4, 2, 2)
    assert fallback["profile"] == "cyclic-windows" and fallback["verified"]

    # A full session over both transports.
    for transport in ("inproc", "socket"):
        session = pfrlab.run_session(3, 2, 2, 2, 3, 7, transport=transport)
        assert session["coefficients"] == [1, 1]
        assert session["download"] == 90 and session["per_db"] == [30, 30, 30]
        assert session["rate"] == "3/5"
        assert len(session["decoded"]) == 54
        assert session["verified"], f"{transport} session failed verification"

    # Download accounting.
    report = pfrlab.rate_report(3, 2, 2, 2)
    assert report["l"] == 54 and report["download_counted"] == 90
    assert report["achieved_rate"] == "3/5" == report["closed_form_rate"]
    assert [b["downloaded_rows"] for b in report["blocks"]] == [48, 36, 6]

    # Privacy audits with their negative controls.
    structural = pfrlab.structural_privacy(3, 2, 2, 2)
    assert structural["uniform"]
    assert len(structural["fingerprints"]) == 3  # one row of hashes per target
    crippled = pfrlab.structural_privacy(3, 2, 2, 2, disable_m_sym=True)
    assert not crippled["uniform"]

    stat = pfrlab.statistical_privacy(3, 2, 2, 2, 1, 2, 200, view="order-trace")
    assert frac(stat["max"]) == 0, stat["max"]
    leak = pfrlab.statistical_privacy(
        3, 2, 2, 2, 1, 2, 200, view="order-trace", leak_row_order=True
    )
    assert frac(leak["max"]) >= Fraction(1, 2), leak["max"]

    # Rate comparisons and the two-combination bound.
    base = pfrlab.baseline_rates(3, 2, 2, 2)
    assert base["scheme_rate"] == "3/5" and base["baseline_rate"] == "9/19"
    assert base["sound"]
    assert pfrlab.outer_bound_pair(3, 2, (1, 1), (2, 1)) == "3/5"
    assert pfrlab.outer_bound_pair(4, 2, (1, 1), (2, 1)) == "2/3"

    # The exact rows a database receives.
    matrices = pfrlab.lowered_queries(3, 2, 2, 2, 3, 11)
    assert len(matrices) == 3 and all(len(m) == 30 for m in matrices)

    # Errors arrive as the right exception types.
    for bad_call in (
        lambda: pfrlab.scheme_params(3, 2, 2, 4),  # not a prime
        lambda: pfrlab.run_session(3, 2, 2, 2, 4, 7),  # target out of range
        lambda: pfrlab.statistical_privacy(3, 2, 2, 2, 1, 2, 50),  # too few samples
        lambda: pfrlab.outer_bound_pair(3, 2, (2, 1), (1, 1)),  # H12 < H1
    ):
        try:
            bad_call()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    print("smoke test passed")


if __name__ == "__main__":
    main()
