import json
import subprocess
import sys

import numpy as np
import pytest

from mub6.cli import (
    EXIT_CORRUPT,
    EXIT_MISMATCH,
    EXIT_OK,
    EXIT_UNRESOLVED,
    EXIT_USAGE,
    RunManifest,
    main,
)
from mub6.core import DiscParams
from mub6.hadsearch import MAT_HEADER, MAT_RECORD, read_matrix_stream
from mub6.sets import HEADER, RECORD_BYTES, SetBundle, SetKind, set_filename
from mub6.stage2 import Verdict, read_certificates


@pytest.fixture(scope="module")
def sets7(tmp_path_factory):
    d = tmp_path_factory.mktemp("sets7")
    assert main(["gen-sets", "--n", "7", "--out", str(d), "--threads", "1"]) == EXIT_OK
    return d


@pytest.fixture(scope="module")
def sets5(tmp_path_factory):
    d = tmp_path_factory.mktemp("sets5")
    assert main(["gen-sets", "--n", "5", "--out", str(d), "--threads", "1", "--digest"]) == EXIT_OK
    return d


def test_gen_sets_outputs(sets5, capsys):
    names = sorted(p.name for p in sets5.iterdir())
    assert "ort_n5_d8.mub6set" in names and "ub_eps_n5_d8.mub6set.sha256" in names
    b = SetBundle(DiscParams(5), sets5, build=False)
    assert len(b.ort) == 1210 and len(b.ub) == 2980


def test_gen_sets_is_deterministic(sets5, tmp_path):
    assert main(["gen-sets", "--n", "5", "--kinds", "ort", "--out", str(tmp_path), "--threads", "1"]) == EXIT_OK
    for kind in (SetKind.ORT_MON, SetKind.ORT, SetKind.ORT_EPS):
        name = set_filename(kind, DiscParams(5))
        assert (tmp_path / name).read_bytes() == (sets5 / name).read_bytes()


@pytest.mark.parametrize(
    "vec, kind, expect",
    [
        ("0,2,5,8,11,14", "ort", "descend: survives"),
        ("0,0,0,0,0,0", "ort", "descend: rejected at generation 0"),
        ("0,0,0,0,0,0", "ub", "descend: rejected at generation 0"),
    ],
)
def test_check_vector(capsys, vec, kind, expect):
    assert main(["check-vector", vec, "--kind", kind, "--n", "17"]) == EXIT_OK
    out = capsys.readouterr().out
    assert expect in out
    assert ("oracle: feasible_certified" in out) == ("survives" in expect)


def test_check_vector_usage_errors(capsys):
    assert main(["check-vector", "1,0,0,0,0,0", "--n", "17"]) == EXIT_USAGE
    assert main(["check-vector", "0,0,0,0,0,99", "--n", "17"]) == EXIT_USAGE
    with pytest.raises(SystemExit) as e:
        main(["check-vector"])
    assert e.value.code == EXIT_USAGE


def test_verify_clean_and_flipped(sets5, tmp_path, capsys):
    path = sets5 / "ort_n5_d8.mub6set"
    assert main(["verify", str(path)]) == EXIT_OK
    data = bytearray(path.read_bytes())
    off = HEADER.size + 7 * RECORD_BYTES
    data[off] = 0xFF
    bad = tmp_path / "bad.mub6set"
    bad.write_bytes(bytes(data))
    capsys.readouterr()
    assert main(["verify", str(bad)]) == EXIT_CORRUPT
    assert f"byte offset {off}" in capsys.readouterr().out


def test_verify_detects_wrong_member(sets5, tmp_path, capsys):
    # a valid-looking file whose records do not satisfy the predicate
    from mub6.sets import VectorSet

    fake = VectorSet(SetKind.ORT, 5, 8, np.arange(0, 40))
    p = fake.write(tmp_path / "fake.mub6set")
    assert main(["verify", str(p)]) == EXIT_CORRUPT
    assert "fails the ORT predicate" in capsys.readouterr().out


def test_verify_unknown_magic(tmp_path, capsys):
    p = tmp_path / "junk"
    p.write_bytes(b"NOTAFILE" + bytes(20))
    assert main(["verify", str(p)]) == EXIT_CORRUPT
    assert "byte offset 0" in capsys.readouterr().out


def run_enum(sets7, out, *extra):
    return main(["enumerate", "--n", "7", "--sets", str(sets7), "--shard", "62/64", "--out", str(out), *extra])


def test_enumerate_limit_and_verify(sets7, tmp_path, capsys):
    out = tmp_path / "p.mub6mat"
    assert run_enum(sets7, out, "--limit", "500") == EXIT_OK
    head, body = read_matrix_stream(out)
    assert head.count == 500 and (head.shard, head.total) == (62, 64)
    assert main(["verify", str(out), "--spot-checks", "50"]) == EXIT_OK
    data = bytearray(out.read_bytes())
    off = MAT_HEADER.size + 3 * MAT_RECORD
    data[off], data[off + 2] = 6, 0
    out.write_bytes(bytes(data))
    assert main(["verify", str(out), "--spot-checks", "5"]) == EXIT_CORRUPT


def test_enumerate_is_byte_identical(sets7, tmp_path):
    a, b = tmp_path / "a.mub6mat", tmp_path / "b.mub6mat"
    assert run_enum(sets7, a, "--limit", "800", "--batch", "64") == EXIT_OK
    assert run_enum(sets7, b, "--limit", "800", "--batch", "1000") == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_enumerate_resume_equivalence(sets7, tmp_path):
    ref = tmp_path / "ref.mub6mat"
    assert run_enum(sets7, ref, "--limit", "900", "--batch", "100") == EXIT_OK
    out = tmp_path / "r.mub6mat"
    ck = tmp_path / "r.ckpt"
    assert run_enum(sets7, out, "--limit", "900", "--batch", "100", "--checkpoint", str(ck),
                    "--checkpoint-interval", "0", "--stop-after", "300") == EXIT_OK
    state = json.loads(ck.read_text())
    assert state["written"] == 300 and not state["done"]
    # simulate a crash after the checkpoint: garbage appended past the recorded count
    with open(out, "ab") as fh:
        fh.write(b"\x01" * 77)
    assert run_enum(sets7, out, "--limit", "900", "--batch", "100", "--checkpoint", str(ck), "--resume") == EXIT_OK
    assert out.read_bytes() == ref.read_bytes()


def test_enumerate_resume_rejects_other_run(sets7, tmp_path):
    out, ck = tmp_path / "x.mub6mat", tmp_path / "x.ckpt"
    assert run_enum(sets7, out, "--limit", "10", "--checkpoint", str(ck)) == EXIT_OK
    rc = main(["enumerate", "--n", "7", "--sets", str(sets7), "--shard", "61/64", "--out", str(out),
               "--checkpoint", str(ck), "--resume"])
    assert rc == EXIT_MISMATCH


def test_enumerate_prune_filters(sets7, tmp_path):
    out = tmp_path / "h.mub6mat"
    assert run_enum(sets7, out, "--limit", "100", "--prune") == EXIT_OK
    head, body = read_matrix_stream(out)
    assert head.kind == 1 and head.count == 100


def test_enumerate_missing_and_mismatched_sets(sets7, sets5, tmp_path):
    assert main(["enumerate", "--n", "7", "--sets", str(tmp_path), "--out", str(tmp_path / "o")]) == EXIT_USAGE
    # an n=5 file under an n=7 name
    d = tmp_path / "mixed"
    d.mkdir()
    for kind in (SetKind.ORT, SetKind.ORT_MON, SetKind.ORT_EPS):
        src = sets5 / set_filename(kind, DiscParams(5))
        (d / set_filename(kind, DiscParams(7))).write_bytes(src.read_bytes())
    assert main(["enumerate", "--n", "7", "--sets", str(d), "--out", str(tmp_path / "o")]) == EXIT_MISMATCH
    bad = bytearray((sets7 / "ort_n7_d8.mub6set").read_bytes())
    bad[0] = 0
    for kind in (SetKind.ORT_MON, SetKind.ORT_EPS):
        name = set_filename(kind, DiscParams(7))
        (d / name).write_bytes((sets7 / name).read_bytes())
    (d / "ort_n7_d8.mub6set").write_bytes(bytes(bad))
    assert main(["enumerate", "--n", "7", "--sets", str(d), "--out", str(tmp_path / "o")]) == EXIT_CORRUPT
    assert main(["enumerate", "--n", "7", "--sets", str(sets7), "--shard", "9/4", "--out", "o"]) == EXIT_USAGE


def test_stage2_empty_input(sets7, tmp_path, capsys):
    inp = tmp_path / "empty.mub6mat"
    assert run_enum(sets7, inp, "--limit", "0") == EXIT_OK
    out = tmp_path / "c.mub6crt"
    assert main(["stage2", "--input", str(inp), "--sets", str(sets7), "--out", str(out)]) == EXIT_OK
    params, certs = read_certificates(out)
    assert params == DiscParams(7) and certs == []


def test_pipeline_n7(sets7, tmp_path, capsys):
    """enumerate -> prune -> stage2 -> verify on a slice of one shard."""
    had = tmp_path / "had.mub6mat"
    assert run_enum(sets7, had, "--limit", "3", "--prune") == EXIT_OK
    crt = tmp_path / "c.mub6crt"
    rc = main(["stage2", "--input", str(had), "--sets", str(sets7), "--out", str(crt), "--budget", "20",
               "--no-elapsed", "--threads", "1"])
    params, certs = read_certificates(crt)
    assert len(certs) == 3
    assert rc == (EXIT_UNRESOLVED if any(c.verdict is Verdict.UNRESOLVED for c in certs) else EXIT_OK)
    first = crt.read_bytes()
    crt2 = tmp_path / "c2.mub6crt"
    main(["stage2", "--input", str(had), "--sets", str(sets7), "--out", str(crt2), "--budget", "20",
          "--no-elapsed", "--threads", "1"])
    if rc == EXIT_OK:
        assert crt2.read_bytes() == first
    vrc = main(["verify", str(crt), "--sets", str(sets7), "--budget", "20"])
    assert vrc in (EXIT_OK, EXIT_UNRESOLVED)
    assert "CORRUPT" not in capsys.readouterr().out


def test_verify_flags_tampered_certificate(sets7, tmp_path, capsys):
    had = tmp_path / "had.mub6mat"
    assert run_enum(sets7, had, "--limit", "2") == EXIT_OK
    crt = tmp_path / "c.mub6crt"
    main(["stage2", "--input", str(had), "--sets", str(sets7), "--out", str(crt), "--budget", "20"])
    _, certs = read_certificates(crt)
    ext = [i for i, c in enumerate(certs) if c.verdict is Verdict.EXTENSION_FOUND]
    if not ext:
        pytest.skip("no extension witness in this slice")
    data = bytearray(crt.read_bytes())
    from mub6.stage2 import CRT_FIXED, record_offsets

    off = record_offsets(certs)[ext[0]] + CRT_FIXED.size
    # copy B row 1 over B row 2
    data[off + 10 : off + 20] = data[off : off + 10]
    crt.write_bytes(bytes(data))
    capsys.readouterr()
    assert main(["verify", str(crt), "--sets", str(sets7)]) == EXIT_CORRUPT
    assert "CORRUPT" in capsys.readouterr().out


def test_shard_plan_and_manifest(sets7, tmp_path, capsys):
    out = tmp_path / "plan"
    assert main(["shard-plan", "--n", "7", "--sets", str(sets7), "--machines", "3", "--out", str(out)]) == EXIT_OK
    files = sorted(out.glob("shard_*.json"))
    assert len(files) == 3
    m = RunManifest.load(files[1])
    assert (m.shard_index, m.shard_total) == (1, 3)
    m.validate((SetKind.ORT, SetKind.ORT_MON))
    m.output = str(tmp_path / "m.mub6mat")
    m.save(files[1])
    assert main(["enumerate", "--manifest", str(files[1]), "--limit", "20"]) == EXIT_OK
    assert read_matrix_stream(tmp_path / "m.mub6mat")[0].shard == 1


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "mub6.cli", "check-vector", "0,0,8,0,8,8", "--n", "17"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "survives" in r.stdout
    r = subprocess.run([sys.executable, "-m", "mub6.cli", "frobnicate"], capture_output=True, text=True)
    assert r.returncode == EXIT_USAGE
