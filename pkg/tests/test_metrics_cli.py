from __future__ import annotations

import csv
import math
import subprocess
import sys

import numpy as np
import pytest

from mebc import (
    BoundViolation,
    CompressionConfig,
    ConfigError,
    ErrorMode,
    Grid,
    bit_rate,
    evaluate,
    generate_synthetic,
    psnr,
    rd_curve,
)
from mebc.cli import main, parse_pipeline
from mebc.metrics import CSV_COLUMNS
from mebc.predictors import lorenzo_predict
from mebc.core import iterate_blocks

from oracles import psnr_oracle


def g(values, dtype=np.float64):
    return Grid.from_array(np.asarray(values, dtype=dtype))


# -- metrics ----------------------------------------------------------------------

def test_psnr_identical_is_inf():
    a = g([1.0, 2.0, 3.0])
    assert psnr(a, a) == math.inf


def test_psnr_forty_db():
    a = g(np.linspace(0, 1, 11))
    assert psnr(a, g(a.data + 0.01)) == pytest.approx(40.0)


def test_psnr_zero_db():
    a = g([0.0, 1.0])
    assert psnr(a, g([1.0, 0.0])) == pytest.approx(0.0)


def test_psnr_matches_oracle():
    rng = np.random.default_rng(0)
    a = rng.standard_normal(300)
    b = a + rng.standard_normal(300) * 1e-3
    assert psnr(g(a), g(b)) == pytest.approx(psnr_oracle(a, b), rel=1e-12)


def test_psnr_dims_mismatch():
    with pytest.raises(ConfigError):
        psnr(g([1.0, 2.0]), g([[1.0, 2.0]]))


@pytest.mark.parametrize("bits,ratio,expected", [(32, 32, 1.0), (64, 8, 8.0), (32, 1, 32.0)])
def test_bit_rate_examples(bits, ratio, expected):
    assert bit_rate(1024 * ratio, 1024, bits) == expected


def test_report_identity():
    grid = generate_synthetic("SINES", (16, 16, 16), seed=0)
    report = evaluate(grid, grid, 1000)
    assert report.bit_rate == pytest.approx(32 / report.compression_ratio, rel=1e-15)


def test_rd_curve_rows_and_monotone_psnr(tmp_path):
    grid = generate_synthetic("SINES", (24, 24, 24), seed=1)
    ebs = [1e-4, 1e-3, 1e-2, 1e-1]
    path = tmp_path / "rd.csv"
    rows = rd_curve(grid, CompressionConfig(1e-4), ebs, path)
    assert [r["eb"] for r in rows] == ebs
    psnrs = [r["psnr"] for r in rows]
    assert all(a >= b for a, b in zip(psnrs, psnrs[1:]))
    assert all(r["max_abs_err"] <= r["eb"] for r in rows)
    with open(path) as fh:
        table = list(csv.reader(fh))
    assert tuple(table[0]) == CSV_COLUMNS and len(table) == 5


def test_rd_curve_single_row_and_inf_psnr(tmp_path):
    grid = generate_synthetic("INTEGER_COUNTS", (10, 12, 12), seed=2)
    rows = rd_curve(grid, CompressionConfig(0.4, pipeline="adaptive"), [0.4], tmp_path / "x.csv")
    assert len(rows) == 1 and rows[0]["psnr"] == math.inf
    with open(tmp_path / "x.csv") as fh:
        assert list(csv.DictReader(fh))[0]["psnr"] == "inf"


def test_rd_curve_validates_eb_list():
    grid = generate_synthetic("SINES", (8, 8), seed=0)
    with pytest.raises(ConfigError):
        rd_curve(grid, CompressionConfig(1e-3), [])
    with pytest.raises(ConfigError):
        rd_curve(grid, CompressionConfig(1e-3), [1e-2, 1e-3])


def test_rd_curve_reports_violations():
    grid = generate_synthetic("SINES", (8, 8), seed=0)
    with pytest.raises(BoundViolation, match="1e-07"):
        rd_curve(grid, CompressionConfig(1e-7, pipeline="trunc", truncation_bytes=1), [1e-7])


# -- synthetic ----------------------------------------------------------------------

def test_constant_field():
    grid = generate_synthetic("CONSTANT", (5, 6), seed=3)
    assert (grid.data == grid.data[0]).all()


def test_affine_field_is_lorenzo_exact():
    grid = generate_synthetic("AFFINE", (7, 8, 9), seed=4)
    block = iterate_blocks(grid, 9)[0]
    for idx in block.indices():
        if min(idx) >= 1:
            assert lorenzo_predict(block, idx) == grid.array[idx]


@pytest.mark.parametrize("kind", ["CONSTANT", "AFFINE", "SINES", "NOISE", "INTEGER_COUNTS"])
def test_synthetic_is_deterministic(kind):
    assert generate_synthetic(kind, (6, 7, 8), seed=9) == generate_synthetic(kind, (6, 7, 8), seed=9)
    assert generate_synthetic(kind, (6, 7, 8), seed=9).dtype == np.float32


def test_integer_counts_are_nonnegative_integers():
    data = generate_synthetic("INTEGER_COUNTS", (20, 16, 16), seed=5).data
    assert (data >= 0).all() and (data == np.round(data)).all() and data.max() > 1


def test_unknown_kind():
    with pytest.raises(ConfigError):
        generate_synthetic("PERLIN", (4,), 0)


# -- CLI -----------------------------------------------------------------------------

def test_parse_pipeline():
    assert parse_pipeline("trunc:2") == ("trunc", 2)
    assert parse_pipeline("lr") == ("lr", None)
    with pytest.raises(ConfigError):
        parse_pipeline("lr:3")


def test_cli_round_trip(tmp_path, capsys):
    raw, comp, out = tmp_path / "a.raw", tmp_path / "a.mebc", tmp_path / "a.out"
    assert main(["gen", "-k", "sines", "-d", "12,13,14", "-t", "f64", "-o", str(raw)]) == 0
    args = ["-t", "f64", "-d", "12,13,14"]
    assert main(["compress", "-i", str(raw), "-o", str(comp), *args, "-M", "ABS", "-e", "1e-4", "-p", "interp"]) == 0
    assert main(["decompress", "-i", str(comp), "-o", str(out)]) == 0
    assert main(["eval", "-a", str(raw), "-b", str(out), *args, "-z", str(comp), "-e", "1e-4"]) == 0
    text = capsys.readouterr().out
    assert "psnr" in text and "bit_rate" in text
    a = np.fromfile(raw, "<f8")
    b = np.fromfile(out, "<f8")
    assert np.abs(a - b).max() <= 1e-4


def test_cli_rd(tmp_path):
    raw, table = tmp_path / "a.raw", tmp_path / "rd.csv"
    main(["gen", "-k", "sines", "-d", "16,16", "-o", str(raw)])
    rc = main(["rd", "-i", str(raw), "-t", "f32", "-d", "16,16", "-p", "lr", "--eb-list", "1e-3,1e-2", "--csv", str(table)])
    assert rc == 0
    assert len(table.read_text().splitlines()) == 3


def test_cli_exit_codes(tmp_path):
    raw = tmp_path / "a.raw"
    main(["gen", "-k", "noise", "-d", "10", "-o", str(raw)])
    # wrong dims -> configuration error
    assert main(["compress", "-i", str(raw), "-o", str(tmp_path / "x"), "-t", "f32", "-d", "11", "-e", "1"]) == 2
    # REL bound outside (0, 1)
    assert main(["compress", "-i", str(raw), "-o", str(tmp_path / "x"), "-t", "f32", "-d", "10", "-M", "REL", "-e", "2"]) == 2
    # corrupt stream
    (tmp_path / "bad").write_bytes(b"XXXX" + bytes(40))
    assert main(["decompress", "-i", str(tmp_path / "bad"), "-o", str(tmp_path / "y")]) == 3
    # explicit truncation that cannot meet the bound
    assert main(["compress", "-i", str(raw), "-o", str(tmp_path / "x"), "-t", "f32", "-d", "10", "-e", "1e-9",
                 "-p", "trunc:1"]) == 4
    # eval against a bound the data misses
    other = tmp_path / "b.raw"
    (np.fromfile(raw, "<f4") + 1).astype("<f4").tofile(other)
    assert main(["eval", "-a", str(raw), "-b", str(other), "-t", "f32", "-d", "10", "-e", "0.5"]) == 4


def test_console_entry_point(tmp_path):
    result = subprocess.run([sys.executable, "-m", "mebc.cli", "--version"], capture_output=True, text=True)
    assert result.returncode == 0 and "mebc" in result.stdout
