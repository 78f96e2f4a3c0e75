import csv
import math
import os

import numpy as np
import pytest

from shortcut_gates.cli import (
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_THRESHOLD,
    ConfigError,
    parse_angle,
    read_config_file,
    resolve,
    run,
)


def read_rows(path):
    with open(path, encoding="utf-8") as fh:
        lines = [l for l in fh if not l.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def call(tmp_path, *argv, name="out.csv"):
    out = tmp_path / name
    code = run(list(argv) + ["--out", str(out), "--no-timestamp"])
    return code, out


@pytest.mark.parametrize(
    "text, value",
    [("pi", math.pi), ("pi/2", math.pi / 2), ("2*pi", 2 * math.pi), ("0.5pi", math.pi / 2), ("-pi", -math.pi), ("1.5", 1.5)],
)
def test_parse_angle(text, value):
    assert parse_angle(text) == pytest.approx(value)


def test_layer_precedence_and_coercion():
    p = resolve([{"epsilon": 0.3}, {"epsilon": "0.4", "open": "true"}, {"n_steps": "4000"}])
    assert p["epsilon"] == 0.4 and p["open"] is True and p["n_steps"] == 4000
    assert p["tf_over_g"] == 10.0
    with pytest.raises(ConfigError):
        resolve([{"epsilonn": 1}])
    with pytest.raises(ConfigError):
        resolve([{"open": "maybe"}])


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("epsilon = 0.3  # default is 0.25\ndelta_beta = pi/2\n")
    assert read_config_file(str(cfg)) == {"epsilon": "0.3", "delta_beta": "pi/2"}
    code, out = call(tmp_path, "pulse", "--config", str(cfg), "--set", "samples=3")
    assert code == EXIT_OK
    _, rows = read_rows(out)
    assert float(rows[0][2]) == pytest.approx((math.pi / 20) / math.tan(0.3))


def test_exit_codes(tmp_path):
    assert call(tmp_path, "pulse", "--set", "nonsense=1")[0] == EXIT_CONFIG
    assert call(tmp_path, "evolve", "--set", "n_steps=10")[0] == EXIT_CONFIG
    assert call(tmp_path, "evolve", "--set", "model=bogus")[0] == EXIT_CONFIG
    assert call(tmp_path, "gate", "--set", "protocol=multiqubit:2")[0] == EXIT_CONFIG
    assert call(tmp_path, "pulse", "--config", str(tmp_path / "missing.cfg"))[0] == EXIT_CONFIG
    assert call(tmp_path, "evolve", "--set", "epsilon=1e-4", "--set", "n_steps=1000")[0] == EXIT_NUMERICAL
    assert call(tmp_path, "evolve", "--threshold", "0.9999")[0] == EXIT_THRESHOLD
    assert call(tmp_path, "evolve", "--threshold", "0.99")[0] == EXIT_OK


def test_fig2a_pulses(tmp_path):
    code, out = call(tmp_path, "figure", "fig2a")
    assert code == EXIT_OK
    header, rows = read_rows(out)
    assert header == ["t", "omega1", "omega2"]
    assert len(rows) == 1001
    first, last = [float(v) for v in rows[0]], [float(v) for v in rows[-1]]
    assert first == pytest.approx([0.0, 0.0, 1.23034738619], abs=1e-10)
    assert last == pytest.approx([10.0, 0.0, -1.23034738619], abs=1e-10)
    assert max(float(r[1]) for r in rows) == pytest.approx(1.2304, abs=1e-4)


def test_fig4a_two_pulse_sets(tmp_path):
    code, out = call(tmp_path, "figure", "fig4a", "--set", "samples=11")
    assert code == EXIT_OK
    header, rows = read_rows(out)
    assert len(header) == 5
    assert float(rows[0][2]) == pytest.approx(0.6152, abs=1e-4)


def test_fig2b_evolution(tmp_path):
    code, out = call(tmp_path, "figure", "fig2b", "--set", "samples=101")
    assert code == EXIT_OK
    header, rows = read_rows(out)
    assert header == ["t", "pop[1,0]", "pop[2,0]", "pop[4,0]", "fidelity", "overlap"]
    assert float(rows[-1][4]) > 0.998
    assert float(rows[-1][4]) == pytest.approx(0.998937575725, abs=1e-8)


def test_open_limit_matches_closed(tmp_path):
    _, closed = call(tmp_path, "evolve", "--set", "model=pair_step", name="c.csv")
    _, opened = call(tmp_path, "evolve", "--set", "model=pair_step", "--set", "open=true", name="o.csv")
    c = np.array(read_rows(closed)[1], float)
    o = np.array(read_rows(opened)[1], float)
    # populations and fidelity; the overlap column is Re<t|psi> closed, |<t|rho|t>| open
    np.testing.assert_allclose(o[:, 1:4], c[:, 1:4], atol=1e-8)
    np.testing.assert_allclose(o[:, 4], c[:, 3], atol=1e-8)


def test_gate_one_qubit_exact(tmp_path):
    code, out = call(tmp_path, "gate", "--exact-epsilon", "--set", "protocol=one_qubit")
    assert code == EXIT_OK
    _, rows = read_rows(out)
    assert min(float(r[1]) for r in rows) > 0.999
    assert os.path.exists(tmp_path / "out.report.txt")


def test_gate_two_qubit_rows(tmp_path):
    code, out = call(tmp_path, "gate")
    assert code == EXIT_OK
    header, rows = read_rows(out)
    assert [r[0] for r in rows] == ["00", "01", "10", "11"]
    assert float(rows[-1][2]) == pytest.approx(math.pi, abs=1e-9)
    assert header[:5] == ["input", "state_fidelity", "phase", "leakage", "max_boundary_population"]
    report = (tmp_path / "out.report.txt").read_text()
    assert "steps: 3" in report and "flag:" in report


def test_reproducible_without_timestamp(tmp_path):
    _, a = call(tmp_path, "figure", "fig2b", "--set", "samples=11", name="a.csv")
    _, b = call(tmp_path, "figure", "fig2b", "--set", "samples=11", name="b.csv")
    assert a.read_bytes() == b.read_bytes()
    run(["figure", "fig2b", "--set", "samples=11", "--out", str(tmp_path / "c.csv")])
    assert "timestamp:" in (tmp_path / "c.csv").read_text()


def test_failed_write_leaves_nothing(tmp_path):
    target = tmp_path / "missing" / "x.csv"
    assert run(["pulse", "--out", str(target)]) == EXIT_CONFIG
    assert not target.parent.exists()
    code, out = call(tmp_path, "pulse")
    assert code == EXIT_OK
    assert [p.name for p in tmp_path.iterdir()] == ["out.csv"]


def test_small_fig3a_grid(tmp_path):
    code, out = call(
        tmp_path, "figure", "fig3a",
        "--set", "grid.x.count=2", "--set", "grid.y.count=2", "--set", "n_steps=2000",
    )
    assert code == EXIT_OK
    header, rows = read_rows(out)
    assert header == ["x:epsilon", "y:tf_over_g", "fidelity", "overlap", "error"]
    assert len(rows) == 4
    assert all(r[4] == "" for r in rows)


def test_sweep_records_bad_cells(tmp_path):
    # epsilon = 0 is outside the allowed range: the cell fails, the sweep does not
    code, out = call(
        tmp_path, "sweep", "--set", "grid.x.min=0", "--set", "grid.x.max=0.5", "--set", "grid.x.count=2",
        "--set", "grid.y.count=1", "--set", "grid.y.min=10", "--set", "n_steps=2000",
    )
    assert code == EXIT_OK
    _, rows = read_rows(out)
    assert rows[0][2] == "nan" and "ParameterError" in rows[0][4]
    assert rows[1][4] == ""


def test_small_fig5a_time_axis(tmp_path):
    code, out = call(
        tmp_path, "figure", "fig5a",
        "--set", "grid.x.count=2", "--set", "grid.y.count=3", "--set", "n_steps=2000",
    )
    assert code == EXIT_OK
    header, rows = read_rows(out)
    assert header[:2] == ["x:kappa", "y:t"]
    assert len(rows) == 6
    t = [float(r[1]) for r in rows[:3]]
    assert t == pytest.approx([0, 10 * math.sqrt(2), 20 * math.sqrt(2)])
    final = [float(rows[2][2]), float(rows[5][2])]
    assert final[0] == pytest.approx(0.615066636667658, abs=1e-6)
    assert final[1] < final[0]
