"""File format round trips and the error paths for malformed inputs."""

import csv
import struct

import numpy as np
import pytest

from topomaps import (
    Codebook,
    ConfigurationError,
    DataFormatError,
    GridTopology,
    HistoryRecord,
    LabelAnchors,
    ModelFile,
    TrainingHistory,
    export_prototype_grid,
    export_sample_sheet,
    load_anchors,
    load_csv,
    load_idx,
    load_model,
    load_pgm_dir,
    save_model,
    write_history_csv,
)


def write_pgm_file(path, pixels, comment=None):
    arr = np.array(pixels, dtype=np.uint8)
    h, w = arr.shape
    head = f"P5\n{'# ' + comment + chr(10) if comment else ''}{w} {h}\n255\n"
    path.write_bytes(head.encode("ascii") + arr.tobytes())


def idx_image_bytes(images):
    """images: list of equally sized 2D uint8 lists."""
    arr = np.array(images, dtype=np.uint8)
    n, rows, cols = arr.shape
    return struct.pack(">IIII", 0x803, n, rows, cols) + arr.tobytes()


def idx_label_bytes(labels):
    return struct.pack(">II", 0x801, len(labels)) + bytes(labels)


def read_pgm(path):
    blob = path.read_bytes()
    # P5, one comment line, dims line, maxval line, raster
    lines = blob.split(b"\n", 4)
    assert lines[0] == b"P5"
    assert lines[1].startswith(b"# ")
    w, h = (int(t) for t in lines[2].split())
    assert lines[3] == b"255"
    raster = lines[4]
    assert len(raster) == w * h
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w)


class TestLoadIdx:
    def test_images_scaled_and_shaped(self, tmp_path):
        p = tmp_path / "img.idx"
        p.write_bytes(idx_image_bytes([[[0, 51], [102, 255]], [[255, 0], [0, 0]]]))
        data = load_idx(p)
        assert data.patterns.shape == (2, 4)
        np.testing.assert_allclose(
            data.patterns[0], [0.0, 51 / 255, 102 / 255, 1.0], atol=1e-15)
        assert data.labels is None

    def test_labels_become_decimal_strings(self, tmp_path):
        ip = tmp_path / "img.idx"
        lp = tmp_path / "lbl.idx"
        ip.write_bytes(idx_image_bytes([[[1]], [[2]]]))
        lp.write_bytes(idx_label_bytes([3, 7]))
        data = load_idx(ip, lp)
        assert data.labels == ("3", "7")

    def test_bad_image_magic(self, tmp_path):
        p = tmp_path / "img.idx"
        blob = idx_image_bytes([[[1]]])
        p.write_bytes(b"\x00\x00\x08\x04" + blob[4:])
        with pytest.raises(DataFormatError, match="magic"):
            load_idx(p)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "img.idx"
        p.write_bytes(idx_image_bytes([[[1, 2], [3, 4]]])[:-1])
        with pytest.raises(DataFormatError, match="expected"):
            load_idx(p)

    def test_label_count_mismatch(self, tmp_path):
        ip = tmp_path / "img.idx"
        lp = tmp_path / "lbl.idx"
        ip.write_bytes(idx_image_bytes([[[1]], [[2]]]))
        lp.write_bytes(idx_label_bytes([3]))
        with pytest.raises(DataFormatError, match="labels"):
            load_idx(ip, lp)

    def test_bad_label_magic(self, tmp_path):
        ip = tmp_path / "img.idx"
        lp = tmp_path / "lbl.idx"
        ip.write_bytes(idx_image_bytes([[[1]]]))
        lp.write_bytes(b"\x00\x00\x08\x03" + idx_label_bytes([5])[4:])
        with pytest.raises(DataFormatError, match="label magic"):
            load_idx(ip, lp)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataFormatError, match="cannot read"):
            load_idx(tmp_path / "nope.idx")


class TestLoadCsv:
    def test_features_and_labels(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x,y,tag\n0.5,1.5,a\n2.5,3.5,b\n")
        data = load_csv(p, label_column="tag")
        np.testing.assert_array_equal(data.patterns, [[0.5, 1.5], [2.5, 3.5]])
        assert data.labels == ("a", "b")

    def test_without_label_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x,y\n1,2\n")
        data = load_csv(p)
        assert data.labels is None
        assert data.patterns.shape == (1, 2)

    def test_ragged_row_names_the_line(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x,y\n1,2\n3\n")
        with pytest.raises(DataFormatError, match="line 3"):
            load_csv(p)

    def test_non_numeric_cell_names_line_and_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x,y\n1,2\n3,oops\n")
        with pytest.raises(DataFormatError, match="line 3.*'y'"):
            load_csv(p)

    def test_unknown_label_column_is_a_config_error(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x,y\n1,2\n")
        with pytest.raises(ConfigurationError, match="'tag'"):
            load_csv(p, label_column="tag")

    def test_label_only_file_has_no_features(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("tag\na\n")
        with pytest.raises(DataFormatError, match="feature"):
            load_csv(p, label_column="tag")

    def test_empty_file(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("")
        with pytest.raises(DataFormatError, match="empty"):
            load_csv(p)


class TestLoadPgmDir:
    def test_rows_follow_sorted_file_order(self, tmp_path):
        write_pgm_file(tmp_path / "b.pgm", [[255, 0], [0, 0]])
        write_pgm_file(tmp_path / "a.pgm", [[0, 51], [102, 255]], comment="first")
        data = load_pgm_dir(tmp_path)
        assert data.patterns.shape == (2, 4)
        assert data.labels is None
        np.testing.assert_allclose(
            data.patterns[0], [0.0, 51 / 255, 102 / 255, 1.0], atol=1e-15)
        assert data.patterns[1, 0] == 1.0

    def test_non_pgm_files_are_ignored(self, tmp_path):
        write_pgm_file(tmp_path / "a.pgm", [[0]])
        (tmp_path / "notes.txt").write_text("skip me")
        assert load_pgm_dir(tmp_path).n == 1

    def test_empty_directory(self, tmp_path):
        with pytest.raises(DataFormatError, match="no .pgm"):
            load_pgm_dir(tmp_path)

    def test_mixed_sizes_rejected(self, tmp_path):
        write_pgm_file(tmp_path / "a.pgm", [[0, 1]])
        write_pgm_file(tmp_path / "b.pgm", [[0], [1]])
        with pytest.raises(DataFormatError, match="expected 1x2"):
            load_pgm_dir(tmp_path)

    def test_ascii_pgm_rejected(self, tmp_path):
        (tmp_path / "a.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
        with pytest.raises(DataFormatError, match="P5"):
            load_pgm_dir(tmp_path)

    def test_wide_maxval_rejected(self, tmp_path):
        (tmp_path / "a.pgm").write_bytes(b"P5\n1 1\n65535\n\x00\x00")
        with pytest.raises(DataFormatError, match="maxval"):
            load_pgm_dir(tmp_path)

    def test_short_raster_rejected(self, tmp_path):
        (tmp_path / "a.pgm").write_bytes(b"P5\n2 2\n255\n\x00\x01\x02")
        with pytest.raises(DataFormatError, match="raster"):
            load_pgm_dir(tmp_path)

    def test_exported_sheet_loads_back(self, tmp_path, rng):
        """The PGM writer and the PGM reader must agree on the format."""
        export_sample_sheet(rng.random((4, 6)), 2, 3, tmp_path / "s.pgm")
        data = load_pgm_dir(tmp_path)
        assert data.n == 1
        assert data.m == (2 * 3 + 1) * (2 * 4 + 1)


class TestModelRoundTrip:
    def make_model(self, rng, with_anchors=True):
        topo = GridTopology((3, 4))
        cb = Codebook(rng.random((12, 5)), topo)
        anchors = LabelAnchors({"a": (0.0, 0.0), "b": (2.0, 3.0)}) if with_anchors else None
        return ModelFile(cb, "stm", sigma_r=2.5, sigma_t=1.5, seed=42, anchors=anchors)

    def test_weights_survive_bit_for_bit(self, tmp_path, rng):
        model = self.make_model(rng)
        p = tmp_path / "m.stm"
        save_model(model, p)
        back = load_model(p)
        assert np.array_equal(back.codebook.weights, model.codebook.weights)
        assert back.codebook.topology.dims == (3, 4)
        assert back.kind_name == "stm"
        assert back.sigma_r == 2.5
        assert back.sigma_t == 1.5
        assert back.seed == 42
        assert back.anchors is not None
        assert set(back.anchors.labels) == {"a", "b"}
        assert tuple(back.anchors.coordinate_for("b")) == (2.0, 3.0)

    def test_save_load_save_is_byte_identical(self, tmp_path, rng):
        model = self.make_model(rng)
        p1 = tmp_path / "m1.stm"
        p2 = tmp_path / "m2.stm"
        save_model(model, p1)
        save_model(load_model(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_unset_radii_come_back_as_none(self, tmp_path, rng):
        cb = Codebook(rng.random((4, 2)), GridTopology((4,)))
        p = tmp_path / "m.stm"
        save_model(ModelFile(cb, "kmeans"), p)
        back = load_model(p)
        assert back.sigma_r is None
        assert back.sigma_t is None
        assert back.anchors is None

    def test_bad_magic(self, tmp_path, rng):
        p = tmp_path / "m.stm"
        save_model(self.make_model(rng), p)
        blob = p.read_bytes()
        p.write_bytes(b"XXXX" + blob[4:])
        with pytest.raises(DataFormatError, match="magic"):
            load_model(p)

    def test_future_version_names_both_versions(self, tmp_path, rng):
        p = tmp_path / "m.stm"
        save_model(self.make_model(rng), p)
        blob = bytearray(p.read_bytes())
        blob[4:6] = struct.pack("<H", 9)
        p.write_bytes(bytes(blob))
        with pytest.raises(DataFormatError, match="version 9.*version 1"):
            load_model(p)

    def test_truncation_detected(self, tmp_path, rng):
        p = tmp_path / "m.stm"
        save_model(self.make_model(rng), p)
        p.write_bytes(p.read_bytes()[:-3])
        with pytest.raises(DataFormatError, match="truncated"):
            load_model(p)

    def test_trailing_bytes_rejected(self, tmp_path, rng):
        p = tmp_path / "m.stm"
        save_model(self.make_model(rng), p)
        p.write_bytes(p.read_bytes() + b"\x00")
        with pytest.raises(DataFormatError, match="trailing"):
            load_model(p)


class TestLoadAnchors:
    def test_comments_and_blank_lines_ignored(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text(
            "# layout for the colour map\n\ngrid 10 10\n"
            "r 1 1\ng 1 8\n# middle\nb 8 4\n"
        )
        anchors = load_anchors(p, GridTopology((10, 10)))
        assert set(anchors.labels) == {"r", "g", "b"}
        assert tuple(anchors.coordinate_for("b")) == (8.0, 4.0)

    def test_one_dimensional_grid_form(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("grid 50\nlow 0\nhigh 49\n")
        anchors = load_anchors(p, GridTopology((50,)))
        assert tuple(anchors.coordinate_for("high")) == (49.0,)

    def test_grid_mismatch(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("grid 5 5\na 1 1\n")
        with pytest.raises(ConfigurationError, match="declares grid"):
            load_anchors(p, GridTopology((10, 10)))

    def test_missing_grid_line(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("a 1 1\n")
        with pytest.raises(ConfigurationError):
            load_anchors(p, GridTopology((10, 10)))

    def test_duplicate_label_names_the_line(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("grid 4 4\na 1 1\na 2 2\n")
        with pytest.raises(ConfigurationError, match="line 3.*duplicate"):
            load_anchors(p, GridTopology((4, 4)))

    def test_wrong_coordinate_count(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("grid 4 4\na 1\n")
        with pytest.raises(ConfigurationError, match="line 2"):
            load_anchors(p, GridTopology((4, 4)))

    def test_non_numeric_coordinate(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("grid 4 4\na one 1\n")
        with pytest.raises(ConfigurationError, match="numeric"):
            load_anchors(p, GridTopology((4, 4)))

    def test_out_of_bounds_coordinate(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("grid 4 4\na 1 5\n")
        with pytest.raises(ConfigurationError, match="outside"):
            load_anchors(p, GridTopology((4, 4)))

    def test_no_anchors_after_grid(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("grid 4 4\n")
        with pytest.raises(ConfigurationError, match="no anchors"):
            load_anchors(p, GridTopology((4, 4)))

    def test_fractional_coordinates_allowed(self, tmp_path):
        p = tmp_path / "a.txt"
        p.write_text("grid 10 10\nmid 4.5 4.5\n")
        anchors = load_anchors(p, GridTopology((10, 10)))
        assert tuple(anchors.coordinate_for("mid")) == (4.5, 4.5)


class TestPrototypeSheet:
    def test_canvas_dimensions(self, tmp_path, rng):
        cb = Codebook(rng.random((100, 784)), GridTopology((10, 10)))
        p = tmp_path / "sheet.pgm"
        export_prototype_grid(cb, 28, 28, p)
        img = read_pgm(p)
        assert img.shape == (10 * 29 + 1, 10 * 29 + 1)

    def test_separators_are_bright(self, tmp_path, rng):
        cb = Codebook(rng.random((4, 4)), GridTopology((2, 2)))
        p = tmp_path / "sheet.pgm"
        export_prototype_grid(cb, 2, 2, p)
        img = read_pgm(p)
        assert np.all(img[0, :] == 255)
        assert np.all(img[:, 3] == 255)

    def test_constant_codebook_renders_black_tiles(self, tmp_path):
        cb = Codebook(np.zeros((4, 4)), GridTopology((2, 2)))
        p = tmp_path / "sheet.pgm"
        export_prototype_grid(cb, 2, 2, p)
        img = read_pgm(p)
        assert np.all(img[1:3, 1:3] == 0)

    def test_repeat_export_is_byte_identical(self, tmp_path, rng):
        cb = Codebook(rng.random((9, 16)), GridTopology((3, 3)))
        p1 = tmp_path / "a.pgm"
        p2 = tmp_path / "b.pgm"
        export_prototype_grid(cb, 4, 4, p1)
        export_prototype_grid(cb, 4, 4, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_tile_shape_must_match_m(self, tmp_path, rng):
        cb = Codebook(rng.random((4, 5)), GridTopology((2, 2)))
        with pytest.raises(ValueError):
            export_prototype_grid(cb, 2, 2, tmp_path / "x.pgm")

    def test_needs_a_2d_grid(self, tmp_path, rng):
        cb = Codebook(rng.random((4, 4)), GridTopology((4,)))
        with pytest.raises(ValueError):
            export_prototype_grid(cb, 2, 2, tmp_path / "x.pgm")


class TestSampleSheet:
    def test_near_square_layout(self, tmp_path, rng):
        p = tmp_path / "s.pgm"
        export_sample_sheet(rng.random((5, 4)), 2, 2, p)
        img = read_pgm(p)
        # 5 tiles -> 3 columns, 2 rows
        assert img.shape == (2 * 3 + 1, 3 * 3 + 1)

    def test_empty_batch_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            export_sample_sheet(np.zeros((0, 4)), 2, 2, tmp_path / "s.pgm")


class TestHistoryCsv:
    def test_round_trip_exact_floats(self, tmp_path):
        records = (
            HistoryRecord(0, 1.2345678901234567, 0.5, 0.1, 5.0),
            HistoryRecord(1, 0.9876543210987654, 1e-7, 0.09, 4.8),
        )
        hist = TrainingHistory(list(records), converged=True)
        p = tmp_path / "h.csv"
        write_history_csv(hist, p)
        with open(p, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["iteration", "energy", "movement", "eta", "sigma_r"]
        assert len(rows) == 3
        for rec, row in zip(records, rows[1:]):
            assert int(row[0]) == rec.iteration
            assert float(row[1]) == rec.energy
            assert float(row[2]) == rec.movement
            assert float(row[3]) == rec.eta
            assert float(row[4]) == rec.sigma_r
