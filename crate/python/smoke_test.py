"""Smoke test for the `vtolctl` Python module.

Build and run:
    maturin develop -m crates/py/Cargo.toml   # or: pip install ./crates/py
    python python/smoke_test.py

Without installing, point VTOLCTL_LIB at a built `libvtolctl.so`; it is
copied to a temporary directory as `vtolctl.so` and imported from there.
"""

import csv
import io
import json
import os
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def import_module():
    lib = os.environ.get("VTOLCTL_LIB")
    if lib:
        tmp = tempfile.mkdtemp()
        shutil.copy(lib, os.path.join(tmp, "vtolctl.so"))
        sys.path.insert(0, tmp)
    import vtolctl

    return vtolctl


def main():
    vt = import_module()

    cfg = json.loads(vt.default_config("hover"))
    cfg["mission"]["duration"] = 12.0
    log_text, metrics_text = vt.run_scenario(json.dumps(cfg))
    metrics = json.loads(metrics_text)
    lines = log_text.splitlines()
    assert lines[0] == vt.LOG_VERSION, lines[0]
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert len(rows) == 3000, len(rows)
    assert metrics["status"] == "ok"
    assert abs(metrics["final_thrust"] - 9.81) < 0.0981, metrics["final_thrust"]
    assert metrics["final_position_error"] < 0.1

    cfg["bogus"] = 1
    try:
        vt.run_scenario(json.dumps(cfg))
    except ValueError:
        pass
    else:
        raise AssertionError("unknown key accepted")

    hover = json.loads(vt.allocate(9.81, 0.0, (0.0, 0.0, 0.0)))
    assert hover["saturated"] == {"w": [False] * 3, "tilt": [False] * 2, "delta": [False] * 2}
    assert abs(hover["achieved"]["thrust"] - 9.81) < 1e-9
    try:
        vt.allocate(9.81, 0.0, (0.0, 3.0, 0.0))
    except ValueError:
        pass
    else:
        raise AssertionError("infeasible allocation accepted")

    report = json.loads(vt.verify_prop1(20, 1))
    assert report["all_passed"], report

    alpha = vt.alpha_min_thrust((3.0, 0.0, 0.0), (2.0, 0.0, 0.0))
    assert alpha == 0.0

    try:
        import jsonschema
    except ImportError:
        jsonschema = None
    if jsonschema is not None:
        schema = json.loads((ROOT / "crates/core/schemas/aircraft_params.schema.json").read_text())
        jsonschema.validate(json.loads(vt.default_config())["aircraft"], schema)
        try:
            jsonschema.validate({"mass": 1.0, "wingspan": 2.0}, schema)
        except jsonschema.ValidationError:
            pass
        else:
            raise AssertionError("schema accepted an unknown key")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
