import json
import hashlib

import numpy as np
import pytest

from rtinverse.fields import ScalarField, PhaseField
from rtinverse.geometry import DiscDomain, boundary_grid
from rtinverse.measurement import BoundarySinogram
from rtinverse.io import (write_field, read_field, write_sinogram,
                          read_sinogram_csv, write_residuals, read_residuals,
                          write_manifest, file_sha256)


class TestFieldRoundTrip:
    def test_scalar_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        f = ScalarField(rng.standard_normal((17, 23)), (-1.3, 1.3, -0.9, 0.9))
        write_field(tmp_path / "f", f)
        back = read_field(tmp_path / "f")
        assert isinstance(back, ScalarField)
        assert np.array_equal(back.values, f.values)
        assert back.bbox == pytest.approx(f.bbox, abs=0)

    def test_phase_bit_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        u = PhaseField(rng.standard_normal((9, 9, 12)), (-1.3, 1.3, -1.3, 1.3))
        write_field(tmp_path / "u", u, kind="solution")
        back = read_field(tmp_path / "u")
        assert isinstance(back, PhaseField)
        assert np.array_equal(back.values, u.values)

    def test_writes_are_deterministic(self, tmp_path):
        f = ScalarField(np.arange(12.0).reshape(3, 4), (0, 1, 0, 1))
        write_field(tmp_path / "a", f)
        write_field(tmp_path / "b", f)
        assert (tmp_path / "a.f64").read_bytes() == (tmp_path / "b.f64").read_bytes()
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_unknown_sidecar_key_rejected(self, tmp_path):
        f = ScalarField(np.zeros((4, 4)), (0, 1, 0, 1))
        write_field(tmp_path / "f", f)
        meta = json.loads((tmp_path / "f.json").read_text())
        meta["surprise"] = 1
        (tmp_path / "f.json").write_text(json.dumps(meta))
        with pytest.raises(ValueError, match="surprise"):
            read_field(tmp_path / "f")

    def test_payload_size_mismatch_rejected(self, tmp_path):
        f = ScalarField(np.zeros((4, 4)), (0, 1, 0, 1))
        write_field(tmp_path / "f", f)
        blob = (tmp_path / "f.f64").read_bytes()
        (tmp_path / "f.f64").write_bytes(blob[:-8])
        with pytest.raises(ValueError, match="size"):
            read_field(tmp_path / "f")


class TestSinogram:
    @pytest.fixture()
    def sino(self):
        d = DiscDomain()
        grid = boundary_grid(d, n_beta=32, n_alpha=8, on="omega1")
        rng = np.random.default_rng(3)
        return BoundarySinogram(grid, rng.standard_normal(len(grid)))

    def test_csv_round_trip(self, tmp_path, sino):
        write_sinogram(tmp_path / "g", sino)
        betas, alphas, weight, values = read_sinogram_csv(tmp_path / "g.csv")
        # every retained sample lands in the pivoted table with its value
        for s in range(len(sino.grid)):
            bi = int(np.searchsorted(betas, sino.grid.beta[s]))
            aj = int(np.searchsorted(alphas, sino.grid.alpha[s]))
            assert values[bi, aj] == sino.values[s]
            assert weight[bi, aj] == sino.grid.weight[s]

    def test_dense_binary_pair(self, tmp_path, sino):
        write_sinogram(tmp_path / "g", sino)
        dense = read_field(tmp_path / "g")
        assert dense.values.shape == (32, 8)
        assert dense.values.sum() == pytest.approx(sino.values.sum(), rel=1e-12)

    def test_csv_single_precision_free(self, tmp_path, sino):
        # %.17g keeps float64 exactly
        write_sinogram(tmp_path / "g", sino)
        _, _, _, values = read_sinogram_csv(tmp_path / "g.csv")
        nz = values[values != 0.0]
        assert np.isin(nz, sino.values).all()


class TestResiduals:
    def test_round_trip(self, tmp_path):
        res = [(1.0, 5.5), (0.25, 3.1), (0.03125, 2.2)]
        p = write_residuals(tmp_path / "r.csv", res)
        back = read_residuals(p)
        assert back.shape == (3, 3)
        assert np.array_equal(back[:, 0], [1, 2, 3])
        assert np.array_equal(back[:, 1], [r[0] for r in res])
        assert np.array_equal(back[:, 2], [r[1] for r in res])


class TestManifest:
    def test_hashes_and_layout(self, tmp_path):
        a = tmp_path / "a.f64"
        a.write_bytes(b"\x00" * 16)
        m = write_manifest(tmp_path / "manifest.json", "deadbeef", [a],
                           {"forward": 1.23456}, extra={"n_terms": 7})
        data = json.loads(m.read_text())
        assert data["config_sha256"] == "deadbeef"
        assert data["artifacts"]["a.f64"] == hashlib.sha256(b"\x00" * 16).hexdigest()
        assert data["timings_sec"]["forward"] == 1.235
        assert data["run"]["n_terms"] == 7
        assert "numpy" in data["versions"]

    def test_file_sha256_matches_hashlib(self, tmp_path):
        p = tmp_path / "x"
        p.write_bytes(b"contents")
        assert file_sha256(p) == hashlib.sha256(b"contents").hexdigest()
