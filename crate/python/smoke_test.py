#!/usr/bin/env python3
"""Smoke test for the `timebin` Python extension.

Builds nothing itself: it expects `cargo build -p timebin-py` (or --release)
to have produced libtimebin.so, stages it as an importable module, and drives
a few small simulations end to end.

Run from the repository root:

    cargo build -p timebin-py
    python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent


def stage_module() -> None:
    """Copy the built cdylib next to sys.path under its import name."""
    candidates = [
        REPO_ROOT / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libtimebin.so", "timebin.so", "libtimebin.dylib")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("libtimebin.so not found; run `cargo build -p timebin-py` first")
    stage = Path(tempfile.mkdtemp(prefix="timebin-py-"))
    suffix = ".so" if built.suffix != ".dylib" else ".so"
    shutil.copy2(built, stage / f"timebin{suffix}")
    sys.path.insert(0, str(stage))


def approx(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol


def main() -> None:
    stage_module()
    import timebin

    print(f"timebin {timebin.__version__}")

    # Closed-form helpers.
    f, std, sigma = timebin.fidelity_from_contrasts(0.52, 0.69, 0.86, 0.07, 0.07, 0.07)
    assert approx(f, 0.7675, 1e-12), f
    assert sigma > 8.0, sigma
    assert approx(timebin.max_contrast_from_snr(4.8), 4.8 / 5.8, 1e-12)
    assert approx(timebin.max_contrast_from_snr(7.7), 7.7 / 8.7, 1e-12)
    print(f"fidelity helper: F = {f:.4f} ± {std:.4f} ({sigma:.1f}σ)")

    # Unconverted control run: near-perfect time-bin correlations.
    cfg = timebin.Config("red-zz")
    result = timebin.run(cfg, trials=1500, seed=12)
    e_z, e_z_std = result.e_z
    assert e_z > 0.95, (e_z, e_z_std)
    assert result.fidelity is None  # single basis
    print(f"red-zz: E_Z = {e_z:.4f} ± {e_z_std:.4f} over {result.events} events")

    # Converted run: contrast diluted to snr/(snr+1).
    cfg = timebin.Config("telecom-zz")
    cfg.set("conversion.snr", "6.25")
    result = timebin.run(cfg, trials=20000, seed=13, parallel=True)
    e_z, e_z_std = result.e_z
    expected = timebin.max_contrast_from_snr(6.25)
    assert approx(e_z, expected, 4 * e_z_std), (e_z, expected)
    print(f"telecom-zz: E_Z = {e_z:.4f} ± {e_z_std:.4f} (bound {expected:.4f})")

    # Full noise-budget run: fidelity inside the expected window.
    cfg = timebin.Config("noise-budget")
    result = timebin.run(cfg, trials=20000, seed=14, parallel=True)
    f, f_std, f_sigma = result.fidelity
    assert 0.80 <= f <= 0.89, (f, f_std)
    print(f"noise-budget: F = {f:.4f} ± {f_std:.4f} ({f_sigma:.1f}σ above classical)")

    # Determinism: identical (config, seed) gives identical event bytes.
    cfg = timebin.Config("telecom-zz")
    a = timebin.run(cfg, trials=800, seed=5).events_csv()
    b = timebin.run(cfg, trials=800, seed=5, parallel=True).events_csv()
    assert a == b
    print("determinism: serial and parallel event CSVs are byte-identical")

    # Interferometer scheduler: phase trace has two samples per cycle.
    cfg = timebin.Config("telecom-x")
    trace = timebin.phase_trace(cfg, 20)
    lines = trace.strip().splitlines()
    assert len(lines) == 1 + 40, len(lines)
    assert lines[0] == "time,delta_phi,phase_of_cycle"
    print("phase trace: 20 cycles -> 40 samples")

    # Sweep across the measured SNR range.
    cfg = timebin.Config("telecom-zz")
    rows = timebin.sweep(cfg, "conversion.snr", [4.8, 7.7])
    for row, snr in zip(rows, (4.8, 7.7)):
        e_z, e_z_std = row.e_z
        bound = timebin.max_contrast_from_snr(snr)
        assert approx(e_z, bound, 5 * e_z_std + 0.01), (snr, e_z, bound)
    print("sweep: contrasts track snr/(snr+1) at both endpoints")

    # Errors surface as Python exceptions.
    try:
        timebin.Config("no-such-scenario")
    except ValueError:
        pass
    else:
        sys.exit("expected ValueError for an unknown scenario")
    try:
        timebin.max_contrast_from_snr(-1.0)
    except ValueError:
        pass
    else:
        sys.exit("expected ValueError for snr <= 0")
    print("error mapping: config errors raise ValueError")

    print("smoke test passed")


if __name__ == "__main__":
    main()
