import csv
import threading

import numpy as np
import pytest

from acqkd import cli
from acqkd.backscatter import write_spectrum_csv, synth_spectrum, LorentzianModel, Peak
from acqkd.pipeline import SWEEP_COLUMNS


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate_writes_transcript(tmp_path):
    out = tmp_path / "t.csv"
    assert cli.main(["simulate", "--preset", "10km", "--n-pulses", "5000", "--seed", "3", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 5000
    assert list(rows[0]) == ["index", "alice_basis", "alice_bit", "bob_basis", "outcome"]


def test_sweep_with_config_and_svg(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\nn_pulses = 200000\n[channel]\npreset = 10km\nmu = 0.1, 0.3\n")
    out, svg = tmp_path / "s.csv", tmp_path / "s.svg"
    assert cli.main(["sweep-mu", "--config", str(ini), "--seed", "5", "--out", str(out), "--svg", str(svg)]) == 0
    rows = read_csv(out)
    assert [float(r["mu"]) for r in rows] == [0.1, 0.3]
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert svg.read_text().lstrip().startswith("<?xml")


def test_sweep_rerun_is_byte_identical(tmp_path):
    args = ["sweep-mu", "--preset", "10km", "--mu", "0.2", "--n-pulses", "200000", "--seed", "11"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(args + ["--out", str(a)])
    cli.main(args + ["--out", str(b), "--workers", "2"])
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("text", ["[channel]\ncontrst = 600\n", "[nope]\n"])
def test_config_error_exit_code(tmp_path, text, capsys):
    ini = tmp_path / "bad.ini"
    ini.write_text(text)
    assert cli.main(["sweep-mu", "--config", str(ini)]) == cli.EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["sweep-mu", "--config", str(tmp_path / "missing.ini")]) == cli.EXIT_CONFIG


def _serve(port_holder, tmp_path, extra=()):
    import socket

    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    port_holder.append(port)
    rc = []
    th = threading.Thread(target=lambda: rc.append(cli.main(
        ["alice", "--listen", f"127.0.0.1:{port}", "--out", str(tmp_path / "alice.key"), *extra])))
    th.start()
    return th, rc


def _connect_bob(port, args, attempts=50):
    import time

    for _ in range(attempts):
        rc = cli.main(["bob", "--connect", f"127.0.0.1:{port}", *args])
        if rc != cli.EXIT_ABORT:
            return rc
        time.sleep(0.05)
    return rc


def test_alice_bob_daemons(tmp_path):
    ports = []
    th, rc = _serve(ports, tmp_path)
    ini = tmp_path / "bob.ini"
    ini.write_text("[run]\nn_pulses = 300000\nseed = 7\n[channel]\npreset = 10km\n")
    assert _connect_bob(ports[0], ["--config", str(ini), "--out", str(tmp_path / "bob.key")]) == 0
    th.join(10)
    assert rc == [0]
    assert (tmp_path / "alice.key").read_text() == (tmp_path / "bob.key").read_text()


def test_bob_abort_exit_code(tmp_path):
    ports = []
    th, rc = _serve(ports, tmp_path)
    # far too few pulses for a secure key: both ends abort with empty-key
    assert _connect_bob(ports[0], ["--preset", "10km", "--n-pulses", "20000"]) == cli.EXIT_ABORT
    th.join(10)
    assert rc == [cli.EXIT_ABORT]


def test_apd_analyze_fixture(tmp_path, capsys):
    out = tmp_path / "apd.csv"
    assert cli.main(["apd-analyze", "--out", str(out)]) == 0
    rows = {r["device_id"]: r for r in read_csv(out)}
    assert float(rows["2"]["k_max"]) == pytest.approx(24520, rel=0.005)
    assert "K_max" in capsys.readouterr().out


def test_apd_analyze_reports_rejects(tmp_path, capsys):
    src = tmp_path / "in.csv"
    src.write_text("device_id,temperature_K,dc_bias_V,qe_percent,dark_per_s\na,100,50,10,20\nb,100,50,200,20\n")
    assert cli.main(["apd-analyze", str(src)]) == 0
    captured = capsys.readouterr()
    assert ":3: rejected" in captured.err
    assert captured.out.startswith("device_id,k_max")


def test_spectrum_fit(tmp_path):
    model = LorentzianModel((Peak(900, -0.4, 0.3), Peak(1500, 0.3, 1.2), Peak(2100, 2.0, 1.0)), 700)
    x = np.linspace(-6, 8, 281)
    src, out, svg = tmp_path / "spectrum.csv", tmp_path / "fit.csv", tmp_path / "fit.svg"
    with open(src, "w", newline="") as fh:
        write_spectrum_csv(x, synth_spectrum(model, x), fh)
    assert cli.main(["spectrum-fit", str(src), "--peaks", "3", "--out", str(out), "--svg", str(svg)]) == 0
    rows = read_csv(out)
    assert [round(float(r["center"]), 6) for r in rows[:3]] == [-0.4, 0.3, 2.0]
    assert rows[3]["peak"] == "background"
    assert svg.exists()


def test_shift_analyze(tmp_path):
    out = tmp_path / "shift.csv"
    assert cli.main(["shift-analyze", "--delta-f", "2e9", "--pmd", "0.2", "--length-km", "20",
                     "--link-km", "20", "--delay-km", "10", "--out", str(out)]) == 0
    (row,) = read_csv(out)
    assert float(row["phase_error_rad"]) == pytest.approx(0.01124, abs=1e-5)
    assert float(row["duty_factor"]) == pytest.approx(1 / 3)


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == 2
