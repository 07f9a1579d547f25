import json

import numpy as np
import pytest

from purityopt.cli import (
    EXIT_DATA,
    EXIT_NO_RESULT,
    EXIT_OK,
    EXIT_USAGE,
    SCHEMA_VERSION,
    default_gamma,
    load_report,
    main,
    parse_builtin_uri,
    report_to_json,
)
from purityopt.errors import ParameterError, SchemaError, ValidationError

BF2_URI = "builtin:bitflip2:p=0.1"


def test_parse_builtin_uri():
    assert parse_builtin_uri("encoder.json") is None
    assert parse_builtin_uri("builtin:ad2") == ("ad2", {})
    name, params = parse_builtin_uri("builtin:bitflip2:p=0.1")
    assert name == "bitflip2"
    assert params == {"p": 0.1}
    name, params = parse_builtin_uri("builtin:d:alpha=0.3,beta=0.7")
    assert params == {"alpha": 0.3, "beta": 0.7}
    with pytest.raises(ParameterError):
        parse_builtin_uri("builtin:")
    with pytest.raises(ParameterError):
        parse_builtin_uri("builtin:x:p")
    with pytest.raises(ParameterError):
        parse_builtin_uri("builtin:x:p=abc")


def test_default_gamma_uses_channel_presets():
    assert default_gamma(BF2_URI) == 15.0
    assert default_gamma("builtin:ad2:p=0.1") == 6.1
    assert default_gamma("builtin:bitflip:p=0.1") == 10.0
    assert default_gamma("some/file.json") == 10.0


def test_usage_errors_exit_64(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["optimize"]) == EXIT_USAGE
    assert main(["optimize", "--channel", BF2_URI, "--r", "2",
                 "--mode", "bogus"]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["verify", "--channel", BF2_URI,
                 "--encoder", "builtin:a:p=0.3"]) == EXIT_USAGE
    capsys.readouterr()


def test_channels_listing(capsys):
    assert main(["channels"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in ("bitflip", "bitflip2", "ad", "ad2"):
        assert f"\n  {name} " in out
    for name in ("repetition", "a", "b", "c", "d", "e", "f"):
        assert f"\n  {name} " in out


def _verify_lines(capsys, argv):
    assert main(argv) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("worst-case purity: ")
    assert lines[1].startswith("argmin parameters: [")
    assert "at resolution 720" in lines[2]
    assert lines[3].endswith("(ok)")
    return float(lines[0].split(": ")[1])


def test_verify_goldens(capsys):
    rep = _verify_lines(capsys, ["verify", "--channel", BF2_URI,
                                 "--encoder", "builtin:repetition"])
    assert abs(rep - 0.6724) < 1e-6
    fam_a = _verify_lines(capsys, ["verify", "--channel", BF2_URI,
                                   "--encoder", "builtin:a"])
    assert abs(fam_a - 0.82) < 1e-6


def test_missing_channel_file_exits_65(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    code = main(["verify", "--channel", str(missing),
                 "--encoder", "builtin:repetition"])
    assert code == EXIT_DATA
    capsys.readouterr()


def test_non_isometry_encoder_file_exits_65(tmp_path, capsys):
    bad = tmp_path / "bad_encoder.json"
    doc = {
        "name": "squash",
        "dim_in": 2,
        "dim_out": 4,
        "kraus": [[[["1", "0"], ["0", "0"]],
                   [["0", "0"], ["0.5", "0"]],
                   [["0", "0"], ["0", "0"]],
                   [["0", "0"], ["0", "0"]]]],
    }
    bad.write_text(json.dumps(doc))
    code = main(["verify", "--channel", BF2_URI, "--encoder", str(bad)])
    assert code == EXIT_DATA
    assert "bad_encoder.json" in capsys.readouterr().err


def test_malformed_json_exits_65(tmp_path, capsys):
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    code = main(["verify", "--channel", str(broken),
                 "--encoder", "builtin:repetition"])
    assert code == EXIT_DATA
    capsys.readouterr()


def _run_optimize(tmp_path, tag, extra=()):
    out = tmp_path / f"report_{tag}.json"
    argv = ["optimize", "--channel", BF2_URI, "--r", "2",
            "--max-iters", "3", "--restarts", "2", "--out", str(out)]
    argv += list(extra)
    code = main(argv)
    return code, out.read_text()


def _strip_wall_clock(text: str) -> str:
    return "\n".join(
        line for line in text.splitlines() if "wall_clock_seconds" not in line
    )


def test_optimize_report_shape_and_exit_2(tmp_path, capsys):
    code, text = _run_optimize(tmp_path, "a")
    assert code == EXIT_NO_RESULT
    assert "no restart produced a certified encoder" in capsys.readouterr().err
    report = json.loads(text)
    assert report["schema_version"] == SCHEMA_VERSION
    assert report["tool"]["name"] == "purityopt"
    assert report["input"]["config"]["gamma"] == 15.0
    assert report["input"]["seeds"] == [0, 1]
    assert report["best"] is None
    assert len(report["restarts"]) == 2
    for block in report["restarts"]:
        assert block["classification"] == "not_converged"
        assert block["certified"] is False
        assert block["encoder"] is None
        assert len(block["trace"]) == 3
        for rec in block["trace"]:
            assert len(rec["choi_eigenvalues"]) == 8


def test_optimize_report_bytes_are_reproducible(tmp_path, capsys):
    _, first = _run_optimize(tmp_path, "b")
    _, second = _run_optimize(tmp_path, "c")
    capsys.readouterr()
    assert _strip_wall_clock(first) == _strip_wall_clock(second)


def test_optimize_certified_run_exits_zero(tmp_path, capsys):
    out = tmp_path / "certified.json"
    code = main(["optimize", "--channel", BF2_URI, "--r", "2",
                 "--max-iters", "200", "--seed", "7", "--out", str(out)])
    assert code == EXIT_OK
    err = capsys.readouterr().err
    assert "best worst-case purity (local optimum): 0.81" in err
    report = json.loads(out.read_text())
    best = report["best"]
    assert best["restart_index"] == 0
    assert abs(best["purity_claim"] - 0.82) < 2e-3
    assert abs(best["oracle"]["min_purity"] - best["purity_claim"]) < 2e-3
    block = report["restarts"][0]
    assert block["certified"] is True
    assert block["classification"] == "certified_local_optimum"
    enc = block["encoder"]
    assert len(enc) == 4 and len(enc[0]) == 2
    lead = block["trace"][-1]["choi_eigenvalues"][0]
    assert abs(lead - 2.0) < 1e-6


def test_report_loader_round_trip_and_version_gate(tmp_path):
    good = tmp_path / "ok.json"
    good.write_text(report_to_json({"schema_version": "1.3", "best": None}))
    assert load_report(good)["best"] is None

    stale = tmp_path / "stale.json"
    stale.write_text(json.dumps({"schema_version": "2.0"}))
    with pytest.raises(SchemaError):
        load_report(stale)

    not_report = tmp_path / "plain.json"
    not_report.write_text(json.dumps({"hello": 1}))
    with pytest.raises(SchemaError):
        load_report(not_report)


def test_emitted_floats_round_trip_exactly():
    values = [0.1, 1.0 / 3.0, 1e-17, -0.0, 12345.678901234567, 2.0 ** -52]
    doc = {"values": values, "n": 3, "flag": True, "none": None, "s": "x\"y"}
    parsed = json.loads(report_to_json(doc))
    assert parsed["values"] == values
    assert parsed == doc


def test_emitter_rejects_non_finite_and_unknown_types():
    with pytest.raises(ValidationError):
        report_to_json({"x": float("nan")})
    with pytest.raises(ValidationError):
        report_to_json({"x": {1, 2}})
    assert report_to_json({"e": {}, "l": []}) == '{\n  "e": {},\n  "l": []\n}\n'


def test_numpy_scalars_serialize_like_python():
    text = report_to_json({"i": np.int64(4), "f": np.float64(0.25)})
    assert json.loads(text) == {"i": 4, "f": 0.25}
