import json
import shutil
from pathlib import Path

import pytest

from bochner import io
from bochner.bundle import random_connection
from bochner.cli import main
from bochner.lattice import build_cycle

CONFIGS = Path(__file__).resolve().parent.parent / "scripts" / "configs"


def _config(tmp_path, name, **changes):
    cfg = json.loads((CONFIGS / name).read_text())
    for key, value in changes.items():
        cfg[key] = value
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def _run(kind, path, out, *extra):
    return main([kind, "--config", str(path), "--out", str(out), *extra])


def test_spectrum_cycle4(tmp_path):
    out = tmp_path / "out"
    assert _run("spectrum", _config(tmp_path, "spectrum_cycle4.json"), out) == 0
    lines = (out / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "index,eigenvalue,cluster_id,multiplicity"
    vals = [float(r.split(",")[1]) for r in lines[1:]]
    assert max(abs(a - b) for a, b in zip(vals, [0, 2, 2, 4])) <= 1e-12
    assert [r.split(",")[3] for r in lines[1:]] == ["1", "2", "2", "1"]
    man = json.loads((out / "manifest.json").read_text())
    assert man["experiment"] == "spectrum" and man["seed"] == 0 and len(man["config_hash"]) == 64
    assert man["outputs"] == ["spectrum.csv"]


def test_split_rerun_is_byte_identical(tmp_path):
    path = _config(tmp_path, "split_torus12_rank3.json")
    assert _run("split", path, tmp_path / "a", "--threads", "1") == 0
    assert _run("split", path, tmp_path / "b") == 0
    for name in ("split_report.json", "final_connection.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rep = json.loads((tmp_path / "a" / "split_report.json").read_text())
    assert rep["status"] == "Simplified"
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    ma.pop("wall_time_seconds"), mb.pop("wall_time_seconds")
    ma.pop("threads"), mb.pop("threads")
    ma["config"].pop("output_dir"), mb["config"].pop("output_dir")
    assert ma["seed"] == mb["seed"] == 1


def test_irreducible_split_exits_zero(tmp_path):
    out = tmp_path / "o"
    assert _run("split", _config(tmp_path, "split_cycle16_rank2.json"), out) == 0
    assert json.loads((out / "split_report.json").read_text())["status"] == "IrreducibleStructure"


def test_seed_override(tmp_path):
    path = _config(tmp_path, "split_cycle16_rank2.json")
    assert _run("split", path, tmp_path / "o", "--seed", "9") == 0
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["seed"] == 9
    assert json.loads((tmp_path / "o" / "split_report.json").read_text())["params"]["seed"] == 9


def test_curves_outputs(tmp_path):
    out = tmp_path / "c"
    assert _run("curves", _config(tmp_path, "curves_torus6.json"), out) == 0
    rows = (out / "curves.csv").read_text().splitlines()
    assert rows[0] == "t,branch_id,eigenvalue,overlap" and len(rows) == 1 + 11 * 12
    assert (out / "crossings.csv").exists() and (out / "field.json").exists()


def test_rigidity_and_gbundle(tmp_path):
    assert _run("rigidity", _config(tmp_path, "rigidity_torus8_rank3.json"), tmp_path / "r") == 0
    pairs = json.loads((tmp_path / "r" / "rigidity_report.json").read_text())["pairs"]
    assert len(pairs) == 66 and all("res_wedge" in p for p in pairs)
    assert _run("gbundle", _config(tmp_path, "gbundle_cycle16_twisted.json"), tmp_path / "g") == 0
    rows = (tmp_path / "g" / "gsimplicity.csv").read_text().splitlines()
    assert rows[0] == "eigenvalue,real_mult,complex_mult,g_simple"
    assert all(r.endswith(",2,1,true") for r in rows[1:])
    corr = json.loads((tmp_path / "g" / "correspondence.json").read_text())
    assert corr["max_deviation"] <= 1e-10


def test_connection_file(tmp_path):
    base = build_cycle(16, 6.283185307179586)
    (tmp_path / "conn.json").write_text(io.connection_to_json(random_connection(base, 2, 3, 1.0)))
    path = _config(tmp_path, "gbundle_cycle16_twisted.json",
                   bundle={"rank": 2, "connection": {"type": "file", "path": "conn.json"}})
    assert _run("gbundle", path, tmp_path / "f") == 0


@pytest.mark.parametrize("mutate", [
    lambda c: c.update(extra=1),
    lambda c: c["experiment"].update(delta=-1),
    lambda c: c["bundle"]["connection"].update(type="magic"),
    lambda c: c["base"].update(n=2),
    lambda c: c.pop("base"),
    lambda c: c["experiment"].update(kind="spectrum"),
])
def test_malformed_config_exits_2_without_outputs(tmp_path, mutate):
    cfg = json.loads((CONFIGS / "split_cycle16_rank2.json").read_text())
    mutate(cfg)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert _run("split", path, out) == 2
    assert not out.exists()


def test_unreadable_config_and_bad_flags(tmp_path):
    (tmp_path / "x.json").write_text("{not json")
    assert main(["spectrum", "--config", str(tmp_path / "x.json")]) == 2
    assert main(["spectrum", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["bogus"]) == 2
    path = _config(tmp_path, "spectrum_cycle4.json")
    assert _run("spectrum", path, tmp_path / "o", "--seed", "-1") == 2
    assert _run("spectrum", path, tmp_path / "o", "--threads", "0") == 2
    assert not (tmp_path / "o").exists()


def test_semantic_config_error_exits_2(tmp_path):
    # constant connections are defined on cycles only
    path = _config(tmp_path, "gbundle_cycle16_twisted.json",
                   base={"type": "torus", "nx": 4, "ny": 4, "lx": 1.0, "ly": 1.0})
    assert _run("gbundle", path, tmp_path / "o") == 2
    assert not (tmp_path / "o").exists()


def test_solver_failure_exits_3(tmp_path):
    path = _config(tmp_path, "curves_torus6.json",
                   bundle={"rank": 3, "connection": {"type": "random"}},
                   experiment={"kind": "curves", "t_grid": [0.0, 1.0], "window": [0, 40],
                               "field_magnitude": 40.0})
    assert _run("curves", path, tmp_path / "o") == 3
    assert not (tmp_path / "o").exists()


def test_relative_output_dir_stays_inside(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    shutil.copy(CONFIGS / "spectrum_cycle4.json", tmp_path / "c.json")
    assert main(["spectrum", "--config", "c.json"]) == 0
    written = sorted(p.relative_to(tmp_path).as_posix() for p in tmp_path.rglob("*") if p.is_file())
    assert written == ["c.json", "runs/spectrum_cycle4/manifest.json",
                       "runs/spectrum_cycle4/spectrum.csv"]


def test_verify_subcommand(tmp_path, capsys):
    assert main(["verify", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 8 and "8/8 criteria passed" in out
    assert json.loads((tmp_path / "verify.json").read_text())["seed"] == 1
