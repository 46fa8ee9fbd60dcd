import json
import math

import numpy as np
import pytest

from minktensor import io as mio
from minktensor.cli import main
from minktensor.symtensor import SymTensor, rank2_spectrum


def write(path, text):
    path.write_text(text)
    return path


# -- point loaders -------------------------------------------------------


def test_csv_three_columns(tmp_path):
    pts = np.random.default_rng(0).random((500, 3))
    p = tmp_path / "pts.csv"
    mio.save_points(p, pts)
    cloud = mio.load_points(p)
    assert cloud.dim == 3 and len(cloud) == 500
    np.testing.assert_array_equal(cloud.points, pts)


def test_csv_header_comments_and_whitespace(tmp_path):
    p = write(tmp_path / "a.txt", "# made by hand\nx y\n0 0\n1 2.5\n\n3 4\n")
    cloud = mio.load_points(p)
    np.testing.assert_array_equal(cloud.points, [[0, 0], [1, 2.5], [3, 4]])


@pytest.mark.parametrize("text,err", [
    ("1,2\n3\n", mio.RaggedRowsError),
    ("1,2\n3,abc\n", mio.NonNumericFieldError),
    ("1,2\n3,nan\n", mio.NonNumericFieldError),
    ("# only comments\n", mio.EmptyDataError),
    ("x,y\n", mio.EmptyDataError),
])
def test_csv_errors_are_distinct(tmp_path, text, err):
    p = write(tmp_path / "bad.csv", text)
    with pytest.raises(err):
        mio.load_points(p)


def test_missing_file_and_min_points(tmp_path):
    with pytest.raises(mio.DataError):
        mio.load_points(tmp_path / "nope.csv")
    p = write(tmp_path / "two.csv", "0,0\n1,1\n")
    with pytest.raises(mio.TooFewPointsError):
        mio.load_points(p, min_points=500)
    with pytest.raises(ValueError):
        mio.load_points(p, format="ply")


def test_voxel_mask_centres(tmp_path):
    p = write(tmp_path / "m.txt", "dims: 2 2\nspacing: 1\n1 1\n1 1\n")
    cloud = mio.load_points(p, "voxel-mask")
    assert sorted(map(tuple, cloud.points)) == [(0.5, 0.5), (0.5, 1.5), (1.5, 0.5), (1.5, 1.5)]
    p = write(tmp_path / "m3.txt", "dims: 1 2 2\nspacing: 2 1 0.5\n0 1 0 0\n")
    np.testing.assert_allclose(mio.load_points(p, "voxel-mask").points, [[1.0, 0.5, 0.75]])


@pytest.mark.parametrize("text,err", [
    ("dims: 2 2\n0 0\n0 0\n", mio.EmptyDataError),
    ("spacing: 1\n1 1 1 1\n", mio.MaskFormatError),
    ("dims: 2 2\n1 1 1\n", mio.MaskFormatError),
    ("dims: 2 2\nspacing: -1\n1 1 1 1\n", mio.MaskFormatError),
    ("dims: 2 2\n1 1 2 1\n", mio.NonNumericFieldError),
    ("dims: 2 2\nfoo: 3\n1 1 1 1\n", mio.MaskFormatError),
])
def test_voxel_mask_errors(tmp_path, text, err):
    p = write(tmp_path / "m.txt", text)
    with pytest.raises(err):
        mio.load_points(p, "voxel-mask")


def test_empty_mask_message(tmp_path):
    p = write(tmp_path / "m.txt", "dims: 1 1\n0\n")
    with pytest.raises(mio.EmptyDataError, match="zero points"):
        mio.load_points(p, "voxel-mask")


# -- height fields ---------------------------------------------------------------


def test_heightfield_grid_and_extent(tmp_path):
    n, pitch = 512, 3 / 512
    hf = mio.heightfield_from_array(np.zeros((n, n)), pitch)
    cloud = hf.to_cloud()
    assert len(cloud) == 262_144
    lo, hi = cloud.bounds()
    np.testing.assert_allclose(hi - lo, [511 * pitch, 511 * pitch, 0])
    assert hf.rms == 0
    np.save(tmp_path / "h.npy", np.zeros((4, 3)))
    assert mio.load_heightfield(tmp_path / "h.npy", 0.5).extent == (1.5, 1.0)


@pytest.mark.parametrize("c,nx", [(0.3, 7), (1.0, 64), (2.5, 200)])
def test_heightfield_tilt_rms(c, nx):
    pitch = 0.01
    i = np.arange(nx)[:, None] * np.ones((1, 5))
    hf = mio.heightfield_from_array(c * pitch * i, pitch)
    assert hf.rms == pytest.approx(c * pitch * math.sqrt((nx**2 - 1) / 12), rel=1e-12)
    scaled = mio.heightfield_from_array(i, pitch, height_scale=c * pitch)
    assert scaled.rms == pytest.approx(hf.rms, rel=1e-12)


def test_heightfield_text_and_errors(tmp_path):
    p = write(tmp_path / "h.txt", "0 1 2\n3 4 5\n")
    hf = mio.load_heightfield(p, 1.0, 2.0)
    assert hf.shape == (2, 3)
    np.testing.assert_array_equal(hf.to_cloud().points[-1], [1, 2, 10])
    with pytest.raises(mio.DataError):
        mio.heightfield_from_array(np.zeros(5), 1.0)
    with pytest.raises(ValueError):
        mio.heightfield_from_array(np.zeros((2, 2)), 0.0)


def test_flat_plane_reference():
    ref = mio.flat_plane_reference(3.0, 0.0)
    assert ref["area"] == pytest.approx(9.0)
    assert ref["phi02"][(3, 3)] == pytest.approx(9 / (4 * math.pi))
    assert 4 * math.pi * sum(ref["phi02"][(i, i)] for i in (1, 2, 3)) == pytest.approx(9.0)
    ref = mio.flat_plane_reference(1.0, 1.0)
    assert ref["area"] == pytest.approx(math.sqrt(2))
    sp = rank2_spectrum(ref["phi02"])
    assert abs(sp.eigenvectors[:, 0] @ np.array([-1, 0, 1]) / math.sqrt(2)) == pytest.approx(1.0)
    assert sp.anisotropy_ratio == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        mio.flat_plane_reference(0.0)


# -- result documents --------------------------------------------------------------


def test_result_document_adds_spectra():
    T = SymTensor.from_entries(2, 2, {(1, 1): 0.3979, (2, 2): 0.2387})
    doc = mio.ResultDocument(["x"], {}, {"t": T.to_dict(), "nested": [{"u": T.to_dict()}]})
    out = json.loads(doc.to_json())
    assert out["results"]["t"]["spectrum"]["anisotropy_ratio"] == pytest.approx(0.5999, abs=1e-4)
    assert "spectrum" in out["results"]["nested"][0]["u"]
    again = mio.ResultDocument.from_json(doc.to_json()).to_json()
    assert again == doc.to_json()


# -- command line -------------------------------------------------------------------


def run_cli(args, capsys):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_oracle_beta_ev(capsys):
    code, out, _ = run_cli(["oracle", "beta-ev", "--d", "2", "--l", "10", "--beta", "-0.5"], capsys)
    assert code == 0
    assert json.loads(out)["results"]["expected_intrinsic_volume"] == pytest.approx(9 * math.pi / 11, rel=1e-12)


def test_oracle_box_and_rounded(capsys):
    code, out, _ = run_cli(["oracle", "box", "--sides", "3,5", "--s", "2"], capsys)
    doc = json.loads(out)
    k1 = [e for e in doc["results"]["minkowski"]["phi"] if e["k"] == 1][0]
    assert k1["tensor"]["entries"]["1,1"] == pytest.approx(0.3979, abs=1e-4)
    assert 0 <= k1["tensor"]["spectrum"]["anisotropy_ratio"] <= 1
    code, out, _ = run_cli(["oracle", "rounded-box", "--sides", "3,5", "--r0", "0.25"], capsys)
    assert code == 0


@pytest.fixture()
def box_csv(tmp_path, capsys):
    out = tmp_path / "box.csv"
    code, _, _ = run_cli(["sample", "box", "--sides", "1,1.5", "--spacing", "0.05", "--out", out], capsys)
    assert code == 0
    return out


def test_sample_estimate_round_trip(box_csv, tmp_path, capsys):
    js = tmp_path / "est.json"
    dump = tmp_path / "series.jsonl"
    code, _, _ = run_cli(["estimate", "--input", box_csv, "--r", "0", "--s", "2", "--n", "10",
                          "--rmax", "0.5", "--renditions", "2", "--seed", "7", "--rotate",
                          "--json-out", js, "--dump-voronoi-series", dump], capsys)
    assert code == 0
    text = js.read_text().rstrip("\n")
    doc = mio.ResultDocument.from_json(text)
    assert doc.to_json() == text
    assert doc.seed == 7 and doc.input_digest == mio.file_digest(box_csv)
    assert len(dump.read_text().splitlines()) == 2
    phi1 = [e for e in doc.results["minkowski"]["phi"] if e["k"] == 1][0]["tensor"]
    assert phi1["entries"]["1,1"] == pytest.approx(1.5 / (4 * math.pi), rel=0.1)


def test_seed_determinism(box_csv, capsys):
    args = ["estimate", "--input", box_csv, "--n", "8", "--rmax", "0.4", "--renditions", "2", "--seed", "3"]
    docs = []
    for _ in range(2):
        code, out, _ = run_cli(args, capsys)
        assert code == 0
        d = json.loads(out)
        d.pop("wall_clock_s")
        docs.append(d)
    assert docs[0] == docs[1]
    code, out, _ = run_cli(args[:-1] + ["4"], capsys)
    other = json.loads(out)
    assert other["results"] != docs[0]["results"]


def test_surface_command(box_csv, capsys):
    code, out, _ = run_cli(["surface", "--input", box_csv, "--eps", "0.2", "--a", "0.01",
                            "--renditions", "1"], capsys)
    assert code == 0
    assert json.loads(out)["results"]["surface"]["trace_area"] > 0
    with pytest.raises(SystemExit) as exc:
        main(["surface", "--input", str(box_csv), "--s", "0"])
    assert exc.value.code == 2


def test_heightfield_command(tmp_path, capsys):
    p = tmp_path / "h.npy"
    np.save(p, np.zeros((40, 40)))
    code, out, _ = run_cli(["heightfield", "--input", p, "--pitch", "0.025", "--n", "8",
                            "--r1", "0.05", "--rmax", "0.2", "--a", "0.02", "--renditions", "1"], capsys)
    assert code == 0
    res = json.loads(out)["results"]
    area = (39 * 0.025) ** 2
    assert res["surface_area_from_trace"] == pytest.approx(area, rel=0.1)
    assert res["heightfield"]["rms"] == 0


def test_exit_codes(tmp_path, capsys):
    code, _, err = run_cli(["estimate", "--input", tmp_path / "missing.csv"], capsys)
    assert code == 3 and "data error" in err
    bad = write(tmp_path / "bad.csv", "1,2\n3\n")
    assert run_cli(["estimate", "--input", bad], capsys)[0] == 3
    pts = write(tmp_path / "p.csv", "0,0\n1,0\n0,1\n")
    code, _, err = run_cli(["estimate", "--input", pts, "--n", "2", "--r1", "0.1", "--rmax", "0.5"], capsys)
    assert code == 4 and "numerical" in err
    with pytest.raises(SystemExit) as exc:
        main(["estimate", "--input", str(pts), "--rmax", "1", "--window", "0,1,0,1"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["estimate", "--input", str(pts), "--renditions", "0"])
    assert exc.value.code == 2
    code, _, _ = run_cli(["oracle", "beta-ev", "--d", "2", "--l", "2", "--beta", "0"], capsys)
    assert code == 2
