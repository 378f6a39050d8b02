import numpy as np
import pytest
import scipy.sparse as sparse

from mlopt.serialize import (TRACE_HEADER, TRACE_MAGIC, read_image_csv,
                             read_matrix_market, read_pgm, read_trace_csv,
                             write_image_csv, write_matrix_market, write_pgm,
                             write_trace_csv)
from mlopt.solver import TraceRow
from mlopt.transfer import Grid2D, build_full_weighting


class TestMatrixMarket:
    def test_exact_roundtrip(self, tmp_path):
        pair = build_full_weighting(Grid2D(8))
        path = tmp_path / "r.mtx"
        write_matrix_market(path, pair.restriction)
        back = read_matrix_market(path)
        assert (back != pair.restriction).nnz == 0

    def test_random_values_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        mat = sparse.random_array((20, 30), density=0.2, rng=rng)
        path = tmp_path / "m.mtx"
        write_matrix_market(path, mat)
        back = read_matrix_market(path)
        assert back.shape == mat.shape
        np.testing.assert_array_equal(back.toarray(), mat.toarray())


class TestPgm:
    def test_roundtrip_quantized(self, tmp_path):
        rng = np.random.default_rng(1)
        img = rng.uniform(0, 1, size=16)
        path = tmp_path / "img.pgm"
        write_pgm(path, img, 4)
        back = read_pgm(path)
        assert back.shape == (4, 4)
        np.testing.assert_array_equal(back.ravel(),
                                      np.rint(np.clip(img, 0, 1) * 255))

    def test_clips_out_of_range(self, tmp_path):
        path = tmp_path / "img.pgm"
        write_pgm(path, np.array([-1.0, 0.5, 2.0, 0.0]), 2)
        back = read_pgm(path)
        np.testing.assert_array_equal(back.ravel(), [0, 128, 255, 0])

    def test_rejects_non_pgm(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_text("hello")
        with pytest.raises(ValueError):
            read_pgm(path)


class TestImageCsv:
    def test_full_precision_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        img = rng.standard_normal(25)
        path = tmp_path / "img.csv"
        write_image_csv(path, img)
        np.testing.assert_array_equal(read_image_csv(path), img)


class TestTraceCsv:
    def rows(self):
        return [TraceRow(k=0, level=0, step_type="fine", f=1.25,
                         grad_norm=0.5, step_size=1.0, grad_evals=2,
                         wall_s=0.001),
                TraceRow(k=1, level=1, step_type="coarse", f=1.0,
                         grad_norm=0.25, step_size=0.5, grad_evals=4,
                         wall_s=0.002)]

    def test_roundtrip(self, tmp_path):
        path = tmp_path / "trace.csv"
        write_trace_csv(path, self.rows())
        cols = read_trace_csv(path)
        np.testing.assert_array_equal(cols["k"], [0, 1])
        np.testing.assert_array_equal(cols["level"], [0, 1])
        assert list(cols["step_type"]) == ["fine", "coarse"]
        np.testing.assert_array_equal(cols["f"], [1.25, 1.0])
        np.testing.assert_array_equal(cols["grad_evals"], [2, 4])

    def test_header_is_versioned_schema(self, tmp_path):
        path = tmp_path / "trace.csv"
        write_trace_csv(path, self.rows())
        lines = path.read_text().splitlines()
        assert lines[0] == TRACE_MAGIC
        assert lines[1] == TRACE_HEADER == \
            "k,level,step_type,f,grad_norm,step_size,grad_evals,wall_s"

    def test_rejects_unknown_version(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("# mlopt-trace-v999\n" + TRACE_HEADER + "\n")
        with pytest.raises(ValueError):
            read_trace_csv(path)

    def test_rejects_foreign_header(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text(TRACE_MAGIC + "\nk,level,f\n")
        with pytest.raises(ValueError):
            read_trace_csv(path)
