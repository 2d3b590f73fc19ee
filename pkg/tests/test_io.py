import hashlib
import json
import struct
from pathlib import Path

import numpy as np
import pytest

from calmedns.exceptions import CheckpointError
from calmedns.io import (
    FORMAT_VERSION,
    MAGIC,
    checkpoint_roundtrip,
    decode_snapshot,
    dumps_json,
    encode_snapshot,
    format_float,
    load_checkpoint,
    read_csv,
    read_snapshot,
    save_checkpoint,
    write_csv,
    write_ou_csv,
)
from calmedns.noise import ou_path, sample_wiener
from calmedns.spectral import WaveGrid, random_field

GOLDEN = Path(__file__).parent / "golden"


def _golden_field():
    import sys

    sys.path.insert(0, str(GOLDEN))
    from make_golden import golden_field

    return golden_field()


class TestSnapshot:
    def test_layout_by_hand(self):
        """Header fields and the first coefficient decoded with struct directly."""
        u = _golden_field()
        blob = encode_snapshot(u)
        magic, version, n, count = struct.unpack_from("<4sHIB", blob)
        assert (magic, version, n, count) == (b"CNSF", 1, 4, 1)
        assert len(blob) == 11 + 16 * 3 * 4 * 4 * 3
        # component y of mode (ix=1, iy=0, iz=0): flat index ((1*4 + 1)*4 + 0)*3 + 0
        j = ((1 * 4 + 1) * 4 + 0) * 3 + 0
        re, im = struct.unpack_from("<dd", blob, 11 + 16 * j)
        assert complex(re, im) == u.coeffs[1, 1, 0, 0]

    def test_golden_bytes(self):
        assert encode_snapshot(_golden_field()) == (GOLDEN / "mode_n4.cnsf").read_bytes()

    def test_golden_decodes(self):
        (u,) = read_snapshot(GOLDEN / "mode_n4.cnsf")
        assert np.array_equal(u.coeffs, _golden_field().coeffs)

    def test_multi_field_roundtrip(self, grid8, rng):
        fields = [random_field(grid8, rng) for _ in range(3)]
        back = decode_snapshot(encode_snapshot(fields))
        assert all(np.array_equal(a.coeffs, b.coeffs) for a, b in zip(fields, back))

    @pytest.mark.parametrize("mutate,msg", [
        (lambda b: b"XXXX" + b[4:], "magic"),
        (lambda b: b[:4] + struct.pack("<H", 9) + b[6:], "version"),
        (lambda b: b[:-16], "size"),
        (lambda b: b[:5], "truncated"),
    ])
    def test_corruption_refused(self, mutate, msg):
        blob = encode_snapshot(_golden_field())
        with pytest.raises(CheckpointError, match=msg):
            decode_snapshot(mutate(blob))

    def test_grid_mismatch(self):
        with pytest.raises(CheckpointError):
            decode_snapshot(encode_snapshot(_golden_field()), WaveGrid(8))

    def test_mixed_grids(self, grid8, rng):
        with pytest.raises(ValueError):
            encode_snapshot([random_field(grid8, rng), _golden_field()])

    def test_constants(self):
        assert MAGIC == b"CNSF" and FORMAT_VERSION == 1


class TestCheckpoint:
    def test_roundtrip(self, tmp_path, grid8, rng):
        u = random_field(grid8, rng)
        side = save_checkpoint(tmp_path / "s.cnsf", u, 1.5, 7, "abc")
        hdr = json.loads(side.read_text())
        assert hdr["sha256"] == hashlib.sha256((tmp_path / "s.cnsf").read_bytes()).hexdigest()
        v, h = load_checkpoint(tmp_path / "s.cnsf", "abc", grid8)
        assert np.array_equal(u.coeffs, v.coeffs) and h["time"] == 1.5 and h["seed"] == 7

    def test_helper(self, tmp_path, grid8, rng):
        u = random_field(grid8, rng)
        assert np.array_equal(checkpoint_roundtrip(u, tmp_path).coeffs, u.coeffs)

    def test_wrong_config(self, tmp_path, grid8, rng):
        save_checkpoint(tmp_path / "s.cnsf", random_field(grid8, rng), 0.0, 0, "abc")
        with pytest.raises(CheckpointError, match="different configuration"):
            load_checkpoint(tmp_path / "s.cnsf", "xyz")

    def test_tampered_payload(self, tmp_path, grid8, rng):
        p = tmp_path / "s.cnsf"
        save_checkpoint(p, random_field(grid8, rng), 0.0, 0, "abc")
        raw = bytearray(p.read_bytes())
        raw[100] ^= 0xFF
        p.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="SHA-256"):
            load_checkpoint(p)

    def test_missing_or_bad_sidecar(self, tmp_path, grid8, rng):
        p = tmp_path / "s.cnsf"
        save_checkpoint(p, random_field(grid8, rng), 0.0, 0, "abc")
        side = p.with_suffix(".json")
        side.write_text("{not json")
        with pytest.raises(CheckpointError, match="unreadable"):
            load_checkpoint(p)
        side.write_text('{"format": "CNSF"}')
        with pytest.raises(CheckpointError, match="lacks"):
            load_checkpoint(p)
        side.unlink()
        with pytest.raises(CheckpointError, match="missing"):
            load_checkpoint(p)


class TestText:
    def test_format_float(self):
        assert format_float(0.1) == "0.1"
        assert float(format_float(1 / 3)) == 1 / 3
        assert format_float(float("-inf")) == "-inf"

    def test_csv_golden(self, tmp_path):
        p = tmp_path / "t.csv"
        write_csv(p, ["t", "x", "flag"], [[0.0, 0.1, True], [0.5, float("nan"), False]], {"config_hash": "0" * 64})
        assert p.read_bytes() == (GOLDEN / "table.csv").read_bytes()

    def test_csv_read(self):
        meta, cols = read_csv(GOLDEN / "table.csv")
        assert meta == {"config_hash": "0" * 64}
        assert np.array_equal(cols["t"], [0.0, 0.5]) and np.isnan(cols["x"][1])
        assert cols["flag"] == ["True", "False"]

    def test_json_golden(self):
        obj = {"b": [1, 2.5, float("inf")], "a": {"z": 1e-300, "y": True}}
        assert dumps_json(obj) == (GOLDEN / "summary.json").read_text()

    def test_json_numpy(self):
        d = json.loads(dumps_json({"a": np.arange(3), "b": np.float64(0.5), "c": np.bool_(True)}))
        assert d == {"a": [0, 1, 2], "b": 0.5, "c": True}

    def test_ou_csv(self, tmp_path):
        ou = ou_path(sample_wiener(0, -0.01, 0.01, 1.25e-3), 1.0)
        write_ou_csv(tmp_path / "ou.csv", ou, {"seed": 0})
        meta, cols = read_csv(tmp_path / "ou.csv")
        assert np.array_equal(cols["z"], ou.values) and meta["seed"] == "0"
