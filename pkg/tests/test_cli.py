import json

import pytest

from bipcomm import cli
from bipcomm.graph import bipartite_conductance, load_edge_list


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


@pytest.fixture
def k2_file(tmp_path):
    return write(tmp_path, "k2.txt", "a b\n")


@pytest.fixture
def c4_file(tmp_path):
    return write(tmp_path, "c4.txt", "0 1\n1 2\n2 3\n3 0\n")


@pytest.fixture
def gadget_file(tmp_path):
    return write(tmp_path, "gadget.txt", "0 1\n1 2\n2 3\n3 0\n4 5\n5 6\n6 7\n7 4\n0 4\n")


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_spectrum_k2(capsys, k2_file):
    code, out = run(capsys, "spectrum", "--input", k2_file, "--k", "1")
    assert code == 0
    row = out.splitlines()[1].split("\t")
    assert float(row[1]) == pytest.approx(0.0, abs=1e-9)
    assert row[2:] == ["1", "1"]


def test_spectrum_c4_laplacian(capsys, c4_file):
    code, out = run(capsys, "spectrum", "--input", c4_file, "--k", "2", "--which", "laplacian", "--format", "json")
    assert code == 0
    rows = json.loads(out)["rows"]
    assert [r["eigenvalue"] for r in rows] == pytest.approx([0.0, 1.0], abs=1e-9)


def test_detect_gadget(capsys, gadget_file):
    code, out = run(capsys, "detect", "--input", gadget_file, "--k", "2", "--r", "2", "--keep-trivial",
                    "--format", "json")
    assert code == 0
    rep = json.loads(out)
    assert len(rep["communities"]) == 2
    G = load_edge_list(open(gadget_file, "rb").read())
    index = {lab: i for i, lab in enumerate(G.labels)}
    for c in rep["communities"]:
        assert c["phi_tilde"] <= 0.2
        pair = bipartite_conductance(G, [index[x] for x in c["S"]], [index[x] for x in c["S_prime"]])
        assert pair.score == c["phi_tilde"]


def test_detect_tsv_layout(capsys, gadget_file):
    code, out = run(capsys, "detect", "--input", gadget_file, "--k", "2", "--r", "2", "--keep-trivial")
    assert code == 0
    lines = [l for l in out.splitlines() if not l.startswith("#")]
    assert lines[0] == "community_id\tside\tvertex_label\tz_score"
    assert {l.split("\t")[1] for l in lines[1:]} == {"S", "S_prime"}


def test_detect_reports_trivial_component(capsys, c4_file):
    code, out = run(capsys, "detect", "--input", c4_file, "--k", "1", "--r", "1", "--format", "json")
    assert code == 0
    assert len(json.loads(out)["trivial"]) == 1


def test_detect_no_community_exit_code(capsys, tmp_path):
    f = write(tmp_path, "tri.txt", "a b\nb c\nc a\n")
    code, _ = run(capsys, "detect", "--input", f, "--k", "1", "--r", "1")
    assert code == cli.EXIT_EMPTY


def test_input_errors(capsys, tmp_path):
    assert run(capsys, "detect", "--input", str(tmp_path / "missing"), "--k", "1", "--r", "1")[0] == 1
    bad = write(tmp_path, "bad.txt", "a b -1\n")
    assert run(capsys, "spectrum", "--input", bad, "--k", "1")[0] == 1
    k2 = write(tmp_path, "k2.txt", "a b\n")
    assert run(capsys, "spectrum", "--input", k2, "--k", "5")[0] == 1
    assert run(capsys, "detect", "--input", k2, "--preset", "nope")[0] == 1
    assert run(capsys, "hypercube", "--k", "10", "--c", "9", "--action", "gap")[0] == 1


def test_usage_errors_are_input_errors(capsys):
    for argv in (["bogus"], ["replay"], ["detect", "--k", "x"]):
        with pytest.raises(SystemExit) as exc:
            cli.main(argv)
        assert exc.value.code == 1


def test_numerical_failure_exit_code(capsys, c4_file, monkeypatch):
    from bipcomm.spectral import ConvergenceError

    def boom(*a, **kw):
        raise ConvergenceError("no convergence", [1.0])

    monkeypatch.setattr(cli, "extreme_eigenpairs", boom)
    assert run(capsys, "spectrum", "--input", c4_file, "--k", "1")[0] == cli.EXIT_NUMERIC


def test_hypercube_gap(capsys):
    code, out = run(capsys, "hypercube", "--k", "10", "--c", "1", "--action", "gap")
    assert code == 0 and out == "2−λ_{n−k} ≤ 3ε: PASS\n"


def test_hypercube_export_c4(capsys):
    code, out = run(capsys, "hypercube", "--k", "2", "--eps", "0.5", "--action", "export")
    assert code == 0
    edges = {tuple(sorted(l.split()[:2])) for l in out.splitlines()}
    assert edges == {("00", "10"), ("00", "01"), ("10", "11"), ("01", "11")}
    assert {float(l.split()[2]) for l in out.splitlines()} == {0.5}


def test_hypercube_probe_and_spectrum(capsys):
    code, out = run(capsys, "hypercube", "--k", "8", "--c", "1", "--action", "probe", "--samples", "300",
                    "--format", "json")
    assert code == 0 and json.loads(out)["passed"]
    code, out = run(capsys, "hypercube", "--k", "4", "--eps", "0.3", "--action", "spectrum")
    assert code == 0 and len(out.splitlines()) == 6


def test_theory_k2(capsys, k2_file):
    code, out = run(capsys, "theory", "--input", k2_file, "--k", "1", "--format", "json")
    assert code == 0
    rep = json.loads(out)
    assert rep["pairs"][0]["phi_tilde"] == 0.0 and rep["pairs"][0]["within_bound"]


def test_theory_strict_exit_code(capsys, c4_file, monkeypatch):
    import bipcomm.theory as theory

    assert run(capsys, "theory", "--input", c4_file, "--k", "2", "--strict")[0] == 0
    monkeypatch.setattr(theory, "theorem_bound", lambda *a, **kw: -1.0)
    assert run(capsys, "theory", "--input", c4_file, "--k", "2")[0] == 0
    assert run(capsys, "theory", "--input", c4_file, "--k", "2", "--strict")[0] == 2


def test_theory_hypercube(capsys):
    code, out = run(capsys, "theory", "--hypercube", "8", "--c", "1", "--k", "8")
    assert code == 0
    rows = [l for l in out.splitlines() if l and not l.startswith("#")][1:]
    assert rows and all(r.split("\t")[3] == "PASS" for r in rows)


def test_manifest_replay(capsys, tmp_path, gadget_file):
    man = str(tmp_path / "m.json")
    code, out = run(capsys, "detect", "--input", gadget_file, "--k", "2", "--r", "2", "--keep-trivial",
                    "--seed", "3", "--manifest", man)
    assert code == 0
    m = json.load(open(man))
    assert m["seed"] == 3 and len(m["eigenvalues"]) == 2 and len(m["communities"]) == 2
    assert "seconds" in m["timing"]
    code, again = run(capsys, "replay", "--manifest", man)
    assert code == 0 and again == out
    with open(gadget_file, "a") as fh:
        fh.write("1 3\n")
    assert run(capsys, "replay", "--manifest", man)[0] == 1


def test_output_file(capsys, tmp_path, c4_file):
    dest = tmp_path / "out.tsv"
    code, out = run(capsys, "spectrum", "--input", c4_file, "--k", "1", "--output", str(dest))
    assert code == 0 and out == "" and dest.read_text().startswith("i\t")


def test_preset_fills_parameters(capsys, tmp_path):
    import numpy as np

    rng = np.random.default_rng(0)
    lines = [f"{u} {v}" for u in range(40) for v in range(u + 1, 40) if rng.random() < 0.15]
    f = write(tmp_path, "g.txt", "\n".join(lines) + "\n")
    code, out = run(capsys, "detect", "--input", f, "--preset", "blogs", "--format", "json")
    assert code == 0
    cfg = json.loads(out)["config"]
    assert cfg["k"] == 6 and cfg["r"] == 3 and cfg["mode"] == "bipartite"
    code, out = run(capsys, "detect", "--input", f, "--preset", "blogs", "--r", "2", "--format", "json")
    assert json.loads(out)["config"]["r"] == 2


def test_format_center():
    assert cli.format_center([0.12, -0.03, -0.4, 0.99]) == "12a_1 - 40a_3 + 99a_4"
    assert cli.format_center([-0.05, 0.01]) == "-5a_1"
    assert cli.format_center([0.01]) == "0"
