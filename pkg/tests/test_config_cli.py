import json

import pytest

from roughlab import cli
from roughlab.config import ConfigError, parse

BASE = """
[experiment]
seed = 1
samples = 8
[model]
h = 0.5
[sweep]
m = 2,3
"""


def test_defaults_parse():
    cfg = parse(BASE, "converge")
    assert cfg["metric.p"] == 2.5 and cfg["sweep.m"] == (2, 3) and cfg.kind == "converge"


@pytest.mark.parametrize("text,needle", [
    ("[model]\nh = 0.2\n", "h > 1/4"),
    ("[model]\nh = 0.35\n[metric]\np = 2.5\n", "hp > 1"),
    ("[metric]\np = 2.5\ngamma = 1.2\n", "gamma > p - 1"),
    ("[metric]\ntheta = 0.3\n", "theta-interval"),
    ("[sweep]\nN_tilde = 3\n", "N_tilde bound"),
    ("[model]\nhurst = 0.5\n", "unknown key"),
    ("[extra]\na = 1\n", "unknown section"),
    ("[model]\nd = two\n", "cannot parse"),
])
def test_constraint_named(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse(text, "converge")


def test_q_must_exceed_two():
    with pytest.raises(ConfigError, match="q > 2"):
        parse("[sweep]\nq = 2.0\n", "ldp1d")


def test_hash_ignores_output_and_threads():
    a = parse(BASE, "converge")
    b = parse(BASE.replace("samples = 8", "samples = 8\noutput = x.csv\nthreads = 4"), "converge")
    c = parse(BASE.replace("seed = 1", "seed = 2"), "converge")
    assert a.hash == b.hash != c.hash


def test_kind_mismatch():
    with pytest.raises(ConfigError, match="declares kind"):
        parse("[experiment]\nkind = ldp1d\n", "converge")
    assert parse("[experiment]\nkind = tailrates\n", "expgood").kind == "expgood"


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_validate_and_run(tmp_path, capsys):
    path = write(tmp_path, BASE)
    assert cli.main(["validate", "--config", path]) == 0
    assert capsys.readouterr().out.startswith("ok ")
    out = tmp_path / "o.csv"
    assert cli.main(["converge", "--config", path, "--out", str(out), "--json"]) == 0
    header = out.read_text().splitlines()[0].split(",")
    assert header[:3] == ["config_hash", "seed", "kind"]
    rows = json.loads(out.with_suffix(".json").read_text())
    assert len(rows) == 2 and rows[0]["m"] == 2


def test_cli_stdout(tmp_path, capsys):
    path = write(tmp_path, "[sweep]\nb = 1\nq = 3\n")
    assert cli.main(["ldp1d", "--config", path]) == 0
    assert capsys.readouterr().out.startswith("config_hash,")


def test_cli_config_invalid(tmp_path):
    assert cli.main(["converge", "--config", write(tmp_path, "[model]\nh = 0.25\n")]) == 2
    assert cli.main(["converge", "--config", str(tmp_path / "missing.ini")]) == 2
    assert cli.main(["converge", "--config", write(tmp_path, BASE), "--threads", "0"]) == 2


def test_cli_numeric_failure(tmp_path):
    text = """
[experiment]
samples = 4
[model]
d = 1
[sweep]
m = 2,3
[rde]
N = 1
x0 = 1.0
linear =
quadratic = 50.0
bound = 100.0
"""
    assert cli.main(["rde-wz", "--config", write(tmp_path, text)]) == 3
