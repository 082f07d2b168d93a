#!/usr/bin/env python3
"""Smoke test for the mhfdia_py extension module.

Builds nothing itself: run `cargo build -p mhfdia-py` first, then
`python3 python/smoke_test.py`. The script locates the cargo-built
cdylib, exposes it under the importable module name, and exercises the
bound API end to end.
"""

import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_module():
    candidates = [
        REPO / "target" / profile / name
        for profile in ("debug", "release")
        for name in ("libmhfdia_py.so", "libmhfdia_py.dylib", "mhfdia_py.dll")
    ]
    lib = next((p for p in candidates if p.exists()), None)
    if lib is None:
        sys.exit("cdylib not found; run `cargo build -p mhfdia-py` first")
    stage = Path(tempfile.mkdtemp(prefix="mhfdia_py_"))
    suffix = ".pyd" if lib.suffix == ".dll" else ".so"
    shutil.copy2(lib, stage / f"mhfdia_py{suffix}")
    sys.path.insert(0, str(stage))
    import mhfdia_py

    return mhfdia_py


def main():
    mhfdia = import_module()
    print(f"mhfdia_py {mhfdia.__version__}")

    # clean run: no alarms, no induced bias
    cfg = mhfdia.RunConfig("synthetic")
    cfg.attack = "none"
    cfg.seed = 7
    trace = mhfdia.run(cfg)
    assert len(trace) == 100, f"expected 100 rows, got {len(trace)}"
    assert sum(trace.column("alarm")) == 0.0
    assert max(trace.column("effectiveness")) == 0.0
    assert not trace.diverged

    # attacked run: stealthy but effective
    cfg.attack = "mh"
    attacked = mhfdia.run(cfg)
    assert max(attacked.column("residual")) <= attacked.epsilon + 1e-9
    assert max(attacked.column("effectiveness")) > 0.0
    assert sum(attacked.column("alarm")) == 0.0

    # determinism: byte-identical exports
    again = mhfdia.run(cfg)
    assert again.to_csv() == attacked.to_csv()
    assert again.to_json() == attacked.to_json()

    # config ergonomics
    toml_cfg = mhfdia.RunConfig.from_toml(
        'scenario = "synthetic"\nattack = "eig"\nseed = 3\n'
    )
    assert toml_cfg.attack == "eig" and toml_cfg.seed == 3
    toml_cfg.validate()
    try:
        mhfdia.RunConfig("marine")
    except ValueError:
        pass
    else:
        raise AssertionError("bad scenario must raise ValueError")

    # small sweep
    cfg.duration = 0.6
    summary = mhfdia.sweep(cfg, "M", [20.0, 200.0], 2)
    cells = summary.cells()
    assert len(cells) == 2 and summary.param == "M"
    assert all(c["max_stealthiness"] <= 1.0 + 1e-9 for c in cells)
    assert cells[1]["mean_effectiveness"] >= cells[0]["mean_effectiveness"] - 1e-12

    print("smoke test passed")


if __name__ == "__main__":
    main()
