"""The command line surface, end to end."""

import json
import subprocess
import sys

import numpy as np
import pytest

from nshapley.cli import main
from nshapley.serialize import read_records

PRODUCT_MODEL = {
    "type": "additive",
    "components": [
        {
            "type": "term",
            "features": [0, 1],
            "factors": [
                {"kind": "poly", "coeffs": [0, 1]},
                {"kind": "poly", "coeffs": [0, 1]},
            ],
        }
    ],
}


@pytest.fixture
def product_fixture(tmp_path):
    """Centered two-feature product background plus the explained point (3, 4)."""
    data = tmp_path / "data.csv"
    data.write_text(
        "f0,f1\n1,1\n1,-1\n-1,1\n-1,-1\n3,4\n"
    )
    return data


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_explain_product_fixture(product_fixture, tmp_path, capsys):
    out = tmp_path / "results.json"
    code = run_cli(
        "explain",
        "--data", product_fixture,
        "--model", json.dumps(PRODUCT_MODEL),
        "--value-fn", "interventional",
        "--background", "0:4",
        "--order", "1",
        "--points", "4",
        "--out", out,
    )
    assert code == 0
    records = read_records(out)
    assert len(records) == 1
    phi = records[0]
    assert phi.order == 1
    assert phi.value(0b01) == pytest.approx(6.0, abs=1e-12)  # ab/2 with a=3, b=4
    assert phi.value(0b10) == pytest.approx(6.0, abs=1e-12)
    assert list(phi.point) == [3.0, 4.0]


def test_explain_all_orders_yields_one_record_per_order(tmp_path):
    data = tmp_path / "d4.csv"
    rows = ["a,b,c,d"]
    rng = np.random.default_rng(0)
    for _ in range(10):
        rows.append(",".join(repr(v) for v in rng.uniform(-1, 1, 4).tolist()))
    data.write_text("\n".join(rows) + "\n")
    out = tmp_path / "results.json"
    model = {
        "type": "additive",
        "components": [
            {"type": "term", "features": [0], "factors": [{"kind": "sine"}]},
            {
                "type": "term",
                "features": [1, 2],
                "factors": [{"kind": "step"}, {"kind": "poly", "coeffs": [0, 1]}],
            },
        ],
    }
    code = run_cli(
        "explain",
        "--data", data,
        "--model", json.dumps(model),
        "--value-fn", "interventional",
        "--order", "all",
        "--points", "0",
        "--out", out,
    )
    assert code == 0
    records = read_records(out)
    assert [r.order for r in records] == [1, 2, 3, 4]
    # efficiency carries through the serialized records
    for r in records:
        assert r.total() == pytest.approx(records[-1].total(), abs=1e-9)


def test_rerun_is_byte_identical(product_fixture, tmp_path):
    out1 = tmp_path / "a.json"
    out2 = tmp_path / "b.json"
    args = [
        "explain",
        "--data", product_fixture,
        "--model", json.dumps(PRODUCT_MODEL),
        "--value-fn", "interventional",
        "--background", "0:4",
        "--order", "all",
        "--points", "4",
    ]
    assert run_cli(*args, "--out", out1) == 0
    assert run_cli(*args, "--out", out2) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_config_file_with_flag_override(product_fixture, tmp_path):
    config = {
        "data": str(product_fixture),
        "model": PRODUCT_MODEL,
        "value_fn": {"type": "interventional"},
        "background": "0:4",
        "order": 2,
        "points": [4],
    }
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(config))
    out = tmp_path / "results.json"
    assert run_cli("explain", "--config", cfg_path, "--order", "1", "--out", out) == 0
    records = read_records(out)
    assert [r.order for r in records] == [1]


def test_unknown_config_key_is_an_error(product_fixture, tmp_path, capsys):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(
        json.dumps(
            {
                "data": str(product_fixture),
                "model": PRODUCT_MODEL,
                "value_fn": "interventional",
                "ordre": 1,
            }
        )
    )
    assert run_cli("explain", "--config", cfg_path) == 2
    assert "ordre" in capsys.readouterr().err


def test_csv_format(product_fixture, tmp_path):
    out = tmp_path / "results.csv"
    assert (
        run_cli(
            "explain",
            "--data", product_fixture,
            "--model", json.dumps(PRODUCT_MODEL),
            "--value-fn", "interventional",
            "--background", "0:4",
            "--order", "1",
            "--points", "4",
            "--format", "csv",
            "--out", out,
        )
        == 0
    )
    lines = out.read_text().splitlines()
    assert lines[0] == "point,order,set,value"
    assert '4,1,"0",6.0' in lines


def test_gam_subcommand(product_fixture, tmp_path):
    out = tmp_path / "gam.json"
    assert (
        run_cli(
            "gam",
            "--data", product_fixture,
            "--model", json.dumps(PRODUCT_MODEL),
            "--value-fn", "interventional",
            "--background", "0:4",
            "--points", "4",
            "--out", out,
        )
        == 0
    )
    records = read_records(out)
    assert len(records) == 1
    gam = records[0]
    assert gam.order == 2
    assert gam.value(0b11) == pytest.approx(12.0, abs=1e-12)
    assert gam.value(0b01) == pytest.approx(0.0, abs=1e-12)


def test_degree_subcommand(tmp_path):
    data = tmp_path / "grid.csv"
    lines = ["x0,x1"]
    for a in (0.25, 0.75):
        for b in (0.25, 0.75):
            lines.append(f"{a},{b}")
    data.write_text("\n".join(lines) + "\n")
    out = tmp_path / "degree.json"
    assert (
        run_cli(
            "degree",
            "--data", data,
            "--model", json.dumps({"type": "checkerboard", "granularity": 2}),
            "--value-fn", "interventional",
            "--points", "all",
            "--out", out,
        )
        == 0
    )
    payload = json.loads(out.read_text())
    assert payload["mean_degree"] == pytest.approx(2.0, abs=1e-9)
    assert payload["order_mass_share"][2] == pytest.approx(1.0, abs=1e-9)
    assert payload["count"] == 4
    csv_out = tmp_path / "degree.csv"
    assert (
        run_cli(
            "degree",
            "--data", data,
            "--model", json.dumps({"type": "checkerboard", "granularity": 2}),
            "--value-fn", "interventional",
            "--points", "all",
            "--format", "csv",
            "--out", csv_out,
        )
        == 0
    )
    lines = csv_out.read_text().splitlines()
    assert lines[0] == "point,degree"
    assert lines[1] == "0,2.0"


def test_check_subcommand_passes(product_fixture, capsys):
    code = run_cli(
        "check",
        "--data", product_fixture,
        "--model", json.dumps(PRODUCT_MODEL),
        "--value-fn", "interventional",
        "--background", "0:4",
        "--order", "all",
        "--points", "4",
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "PASS" in out
    assert "FAIL" not in out
    assert "dual-path" in out
    assert "order-1-oracle" in out


def test_plot_bars_single_file(product_fixture, tmp_path):
    out = tmp_path / "bars.svg"
    assert (
        run_cli(
            "plot", "bars",
            "--data", product_fixture,
            "--model", json.dumps(PRODUCT_MODEL),
            "--value-fn", "interventional",
            "--background", "0:4",
            "--order", "2",
            "--points", "4",
            "--out", out,
        )
        == 0
    )
    text = out.read_text()
    assert text.startswith("<svg")
    assert ">f0<" in text  # dataset column names label the bars


def test_plot_bars_directory(product_fixture, tmp_path):
    out_dir = tmp_path / "figs"
    assert (
        run_cli(
            "plot", "bars",
            "--data", product_fixture,
            "--model", json.dumps(PRODUCT_MODEL),
            "--value-fn", "interventional",
            "--background", "0:4",
            "--order", "all",
            "--points", "4",
            "--out", out_dir,
        )
        == 0
    )
    names = sorted(p.name for p in out_dir.iterdir())
    assert names == ["bars_point4_order1.svg", "bars_point4_order2.svg"]


def test_plot_dependence(tmp_path):
    data = tmp_path / "grid.csv"
    lines = ["u,v"]
    rng = np.random.default_rng(1)
    for _ in range(8):
        lines.append(",".join(repr(v) for v in rng.uniform(0, 1, 2).tolist()))
    data.write_text("\n".join(lines) + "\n")
    out = tmp_path / "dep.svg"
    model = {
        "type": "additive",
        "components": [
            {"type": "term", "features": [0], "factors": [{"kind": "poly", "coeffs": [0, 1, 1]}]}
        ],
    }
    assert (
        run_cli(
            "plot", "dependence", "0",
            "--data", data,
            "--model", json.dumps(model),
            "--value-fn", "interventional",
            "--order", "1",
            "--points", "all",
            "--out", out,
        )
        == 0
    )
    assert out.exists()
    csv_lines = (tmp_path / "dep.csv").read_text().splitlines()
    assert csv_lines[0] == "x,phi"
    assert len(csv_lines) == 9


def test_point_sampling_is_seeded(product_fixture, tmp_path):
    out1 = tmp_path / "s1.json"
    out2 = tmp_path / "s2.json"
    args = [
        "explain",
        "--data", product_fixture,
        "--model", json.dumps(PRODUCT_MODEL),
        "--value-fn", "interventional",
        "--order", "1",
        "--points", "sample:2",
        "--seed", "7",
    ]
    assert run_cli(*args, "--out", out1) == 0
    assert run_cli(*args, "--out", out2) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_external_model_through_cli(product_fixture, tmp_path):
    stub = tmp_path / "stub.py"
    stub.write_text(
        "import sys\n"
        "while True:\n"
        "    header = sys.stdin.readline()\n"
        "    if not header:\n"
        "        break\n"
        "    _, dim, count = header.split()\n"
        "    rows = [sys.stdin.readline() for _ in range(int(count))]\n"
        "    assert sys.stdin.readline().strip() == 'END'\n"
        "    for row in rows:\n"
        "        a, b = map(float, row.split(','))\n"
        "        sys.stdout.write(repr(a * b) + '\\n')\n"
        "    sys.stdout.write('END\\n')\n"
        "    sys.stdout.flush()\n"
    )
    out = tmp_path / "ext.json"
    model = {"type": "external", "command": f"{sys.executable} {stub}", "timeout": 30}
    assert (
        run_cli(
            "explain",
            "--data", product_fixture,
            "--model", json.dumps(model),
            "--value-fn", "interventional",
            "--background", "0:4",
            "--order", "1",
            "--points", "4",
            "--out", out,
        )
        == 0
    )
    phi = read_records(out)[0]
    assert phi.value(0b01) == pytest.approx(6.0, abs=1e-12)


def test_gam_value_function_recovers_declared_components(tmp_path):
    # value_fn "gam" with the same components as the additive model:
    # the full-order record reproduces the declared component values
    data = tmp_path / "pts.csv"
    data.write_text("p,q\n0.5,2.0\n1.5,-1.0\n")
    components = [
        {"type": "constant", "value": 1.0},
        {"type": "term", "features": [0], "factors": [{"kind": "poly", "coeffs": [0, 2]}]},
        {
            "type": "term",
            "features": [0, 1],
            "factors": [
                {"kind": "poly", "coeffs": [0, 1]},
                {"kind": "poly", "coeffs": [0, 1]},
            ],
        },
    ]
    out = tmp_path / "gam.json"
    assert (
        run_cli(
            "gam",
            "--data", data,
            "--model", json.dumps({"type": "additive", "components": components}),
            "--value-fn", json.dumps({"type": "gam", "components": components}),
            "--points", "0",
            "--out", out,
        )
        == 0
    )
    gam = read_records(out)[0]
    assert gam.baseline == pytest.approx(1.0, abs=1e-12)
    assert gam.value(0b01) == pytest.approx(2 * 0.5, abs=1e-12)
    assert gam.value(0b10) == pytest.approx(0.0, abs=1e-12)
    assert gam.value(0b11) == pytest.approx(0.5 * 2.0, abs=1e-12)


def test_knn_model_with_label_column(tmp_path):
    data = tmp_path / "labeled.csv"
    lines = ["a,b,y"]
    for i in range(8):
        bits = [(i >> j) & 1 for j in range(2)]
        lines.append(f"{bits[0]},{bits[1]},{bits[0] ^ bits[1]}")
    data.write_text("\n".join(lines) + "\n")
    out = tmp_path / "deg.json"
    assert (
        run_cli(
            "degree",
            "--data", data,
            "--model", json.dumps({"type": "knn", "k": 2, "label": "y"}),
            "--value-fn", "interventional",
            "--points", "all",
            "--out", out,
        )
        == 0
    )
    payload = json.loads(out.read_text())
    assert payload["count"] == 8
    assert payload["mean_degree"] > 1.0  # the XOR labels force interaction


def test_errors_exit_with_code_two(tmp_path, capsys):
    assert run_cli("explain", "--data", tmp_path / "missing.csv",
                   "--model", "checkerboard", "--value-fn", "interventional") == 2
    assert "error" in capsys.readouterr().err


def test_order_beyond_dimension_rejected(product_fixture, capsys):
    assert (
        run_cli(
            "explain",
            "--data", product_fixture,
            "--model", json.dumps(PRODUCT_MODEL),
            "--value-fn", "interventional",
            "--order", "9",
            "--points", "4",
        )
        == 2
    )
    assert "exceeds" in capsys.readouterr().err


def test_module_entry_point(product_fixture, tmp_path):
    out = tmp_path / "results.json"
    proc = subprocess.run(
        [
            sys.executable, "-m", "nshapley", "explain",
            "--data", str(product_fixture),
            "--model", json.dumps(PRODUCT_MODEL),
            "--value-fn", "interventional",
            "--background", "0:4",
            "--order", "1",
            "--points", "4",
            "--out", str(out),
        ],
        capture_output=True,
        text=True,
        cwd="/root/pkg",
        env={"PYTHONPATH": "/root/pkg/src", "PATH": "/usr/bin:/bin:/usr/local/bin"},
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
