import json
import socket
import subprocess
import sys
import threading

import pytest

from norm2pc import cli


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def write_csv(path, *rows):
    path.write_text("\n".join(",".join(str(v) for v in r) for r in rows) + "\n")
    return str(path)


def run_cli(argv, capsys):
    code = cli.main(argv)
    return code, capsys.readouterr()


def last_json(out):
    return json.loads(out.strip().splitlines()[-1])


def test_run_local_l1_writes_report(tmp_path, capsys):
    inp = write_csv(tmp_path / "in.csv", ["x0", "x1"], [1, 2], [4, 0])
    rep = tmp_path / "rep.json"
    code, io = run_cli(["run", "--local", "--protocol", "l1", "--input", inp, "--report", str(rep)], capsys)
    assert code == 0
    assert last_json(io.out)["output"] == [5]
    doc = json.loads(rep.read_text())
    assert doc["protocol"] == "l1" and doc["output"] == [5]
    assert all(c["ok"] for c in doc["bound_checks"])


@pytest.mark.parametrize("backend", ["dealer", "iknp"])
def test_run_local_linf(tmp_path, capsys, backend):
    inp = write_csv(tmp_path / "in.csv", [1, 9], [4, 0])
    code, io = run_cli(["run", "--local", "--protocol", "linf", "--backend", backend, "--input", inp], capsys)
    assert code == 0
    assert last_json(io.out)["output"] == [9]


def test_run_random_inputs(capsys):
    code, io = run_cli(["run", "--local", "--protocol", "max", "--dim", "10", "--bits", "16"], capsys)
    assert code == 0
    assert len(last_json(io.out)["output"]) == 1


def test_bad_csv_is_config_error(tmp_path, capsys):
    bad = write_csv(tmp_path / "bad.csv", [1, 2], [3, "x"])
    assert run_cli(["run", "--local", "--protocol", "l1", "--input", bad], capsys)[0] == 2
    short = write_csv(tmp_path / "short.csv", [1, 2])
    assert run_cli(["run", "--local", "--protocol", "l1", "--input", short], capsys)[0] == 2
    uneven = write_csv(tmp_path / "uneven.csv", [1, 2], [3])
    assert run_cli(["run", "--local", "--protocol", "l1", "--input", uneven], capsys)[0] == 2
    wide = write_csv(tmp_path / "wide.csv", [300], [0])
    assert run_cli(["run", "--local", "--protocol", "l1", "--bits", "8", "--input", wide], capsys)[0] == 2


def test_usage_errors(capsys):
    assert run_cli(["run", "--local"], capsys)[0] == 2
    assert run_cli(["run", "--protocol", "l1"], capsys)[0] == 2
    assert run_cli(["nonsense"], capsys)[0] == 2


def test_verify_passes(capsys):
    code, io = run_cli(["verify", "--protocol", "abs", "--bits-list", "8,16", "--trials", "50"], capsys)
    assert code == 0
    assert io.out.count("PASS") == 2


def test_verify_mill_is_exhaustive_at_8_bits():
    ok, checked, cex = cli.verify_protocol("mill", 8, trials=10)
    assert ok and checked == 65536 and cex is None


def test_verify_detects_injected_fault(tmp_path, capsys):
    rep = tmp_path / "v.json"
    code, io = run_cli(
        ["verify", "--protocol", "base_mux", "--bits-list", "16", "--trials", "20", "--inject-fault", "0", "--report", str(rep)],
        capsys,
    )
    assert code == 1
    assert "FAIL" in io.out and "counterexample" in io.out
    cex = json.loads(rep.read_text())[0]["counterexample"]
    assert cex["expected"] != cex["got"]


def test_bench_max_depth_single_element_is_free(capsys):
    code, io = run_cli(["bench", "--suite", "max-depth", "--sweep", "1,4"], capsys)
    assert code == 0
    rows = [json.loads(line) for line in io.out.splitlines()]
    assert rows[0]["mb"] == 0 and rows[0]["tree_rounds"] == 0
    assert rows[1]["tree_levels"] == 2 and rows[1]["sequential_rounds"] > rows[1]["tree_rounds"]


def test_bench_conv_adder_small_sweep(tmp_path, capsys):
    out = tmp_path / "conv_adder.csv"
    code, io = run_cli(["bench", "--suite", "conv-adder", "--sweep", "2^6,2^8", "--measure", "--csv", str(out)], capsys)
    assert code == 0
    rows = [json.loads(line) for line in io.out.splitlines()]
    assert [r["n"] for r in rows] == [64, 256]
    assert all(r["adder_mb"] < r["conv_mb"] for r in rows)
    assert out.read_text().startswith("n,conv_mb")


def test_bench_layers_analytic(capsys):
    code, io = run_cli(["bench", "--suite", "layers"], capsys)
    assert code == 0
    assert len(io.out.strip().splitlines()) == 4


def _two_processes(args0, args1, timeout=120):
    cmd = [sys.executable, "-m", "norm2pc"]
    p0 = subprocess.Popen(cmd + args0, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    p1 = subprocess.Popen(cmd + args1, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    out = [p.communicate(timeout=timeout) for p in (p0, p1)]
    return (p0.returncode, p1.returncode), out


@pytest.mark.parametrize("backend", ["dealer", "iknp"])
def test_tcp_loopback_matches_local(tmp_path, backend):
    x = write_csv(tmp_path / "x.csv", [3, -7, 12, 5])
    y = write_csv(tmp_path / "y.csv", [1, 2, -4, 5])
    port = free_port()
    base = ["run", "--protocol", "l1", "--backend", backend, "--reveal"]
    codes, out = _two_processes(
        base + ["--party", "0", "--listen", f"127.0.0.1:{port}", "--input", x],
        base + ["--party", "1", "--connect", f"127.0.0.1:{port}", "--input", y],
    )
    assert codes == (0, 0), out
    for stdout, _ in out:
        assert json.loads(stdout.strip().splitlines()[-1])["output"] == [2 + 9 + 16 + 0]


def test_tcp_config_mismatch_exits_2(tmp_path):
    x = write_csv(tmp_path / "x.csv", [1, 2])
    port = free_port()
    codes, out = _two_processes(
        ["run", "--protocol", "l1", "--party", "0", "--listen", f"127.0.0.1:{port}", "--input", x],
        ["run", "--protocol", "linf", "--party", "1", "--connect", f"127.0.0.1:{port}", "--input", x],
    )
    assert codes == (2, 2), out
    assert "configuration differs" in out[0][1]


def test_setup_baseot_local_files_and_run(tmp_path, capsys):
    code, _ = run_cli(["setup-baseot", "--local", "--seed", "4", "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    assert (tmp_path / "baseot_p0.bin").read_bytes().startswith(b"NORM2PC-BOT1")
    inp = write_csv(tmp_path / "in.csv", [1, 9], [4, 0])
    code, io = run_cli(
        ["run", "--local", "--protocol", "linf", "--backend", "iknp", "--baseot", str(tmp_path), "--input", inp], capsys
    )
    assert code == 0
    assert last_json(io.out)["output"] == [9]
    code, _ = run_cli(
        ["run", "--local", "--protocol", "linf", "--backend", "iknp", "--baseot", str(tmp_path / "baseot_p0.bin")], capsys
    )
    assert code == 2


def test_setup_baseot_over_tcp(tmp_path):
    port = free_port()
    results = {}

    def party(p, flag):
        results[p] = cli.main(["setup-baseot", "--party", str(p), flag, f"127.0.0.1:{port}", "--out-dir", str(tmp_path)])

    t = [threading.Thread(target=party, args=(0, "--listen")), threading.Thread(target=party, args=(1, "--connect"))]
    for th in t:
        th.start()
    for th in t:
        th.join(120)
    assert results == {0: 0, 1: 0}
    from norm2pc.ot import BaseOtSetup

    s0 = BaseOtSetup.load(tmp_path / "baseot_p0.bin")
    s1 = BaseOtSetup.load(tmp_path / "baseot_p1.bin")
    assert (s0.party, s1.party) == (0, 1)
