"""Binary checkpoint format, diffs and content hashes."""

import hashlib
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqg.checkpoint import (
    MAGIC,
    decode,
    diff_checkpoints,
    encode,
    git_blob_hash,
    read_checkpoint,
    sha256_file,
    write_checkpoint,
)
from sqg.errors import CheckpointError
from sqg.solver import SolverConfig, run_simulation
from sqg.spectral import GridSpec

from conftest import random_field, single_mode


class TestRoundtrip:
    def test_bit_exact(self, tmp_path, grid32):
        f = random_field(grid32, seed=3)
        path = tmp_path / "a.sqgf"
        write_checkpoint(path, f, 0.7, 0.123456789)
        header, g = read_checkpoint(path)
        assert g.coeffs.tobytes() == f.coeffs.tobytes()
        assert (header.n, header.length, header.gamma, header.time) == (32, 1.0, 0.7, 0.123456789)

    @given(length=st.floats(1e-3, 1e3), gamma=st.floats(0.01, 1.0), time=st.floats(0, 1e6))
    def test_header_echo(self, length, gamma, time):
        g = GridSpec(8, length)
        header, _ = decode(encode(g.zeros(), gamma, time))
        assert (header.length, header.gamma, header.time) == (length, gamma, time)

    def test_size(self, grid32):
        data = encode(grid32.zeros(), 1.0, 0.0)
        assert len(data) == 4 + 4 + 4 + 3 * 8 + 32 * 17 * 16

    def test_layout_is_little_endian(self, grid32):
        data = encode(grid32.zeros(), 0.5, 2.0)
        assert data[:4] == MAGIC
        assert struct.unpack_from("<IIddd", data, 4) == (1, 32, 1.0, 0.5, 2.0)


class TestMalformed:
    def test_bad_magic(self, grid32):
        data = bytearray(encode(grid32.zeros(), 1.0, 0.0))
        data[:4] = b"XXXX"
        with pytest.raises(CheckpointError, match="magic"):
            decode(bytes(data))

    def test_wrong_version(self, grid32):
        data = bytearray(encode(grid32.zeros(), 1.0, 0.0))
        struct.pack_into("<I", data, 4, 2)
        with pytest.raises(CheckpointError, match="version"):
            decode(bytes(data))

    @pytest.mark.parametrize("cut", [10, 100])
    def test_truncated(self, grid32, cut):
        data = encode(grid32.zeros(), 1.0, 0.0)
        with pytest.raises(CheckpointError):
            decode(data[:-cut] if cut == 100 else data[:cut])

    def test_trailing_bytes(self, grid32):
        with pytest.raises(CheckpointError, match="bytes"):
            decode(encode(grid32.zeros(), 1.0, 0.0) + b"\0")

    def test_incompatible_diff(self, tmp_path):
        write_checkpoint(tmp_path / "a.sqgf", GridSpec(8).zeros(), 1.0, 0.0)
        write_checkpoint(tmp_path / "b.sqgf", GridSpec(16).zeros(), 1.0, 0.0)
        with pytest.raises(CheckpointError, match="incompatible"):
            diff_checkpoints(tmp_path / "a.sqgf", tmp_path / "b.sqgf")


class TestDiff:
    def test_self_diff_is_zero(self, tmp_path, grid32):
        path = tmp_path / "a.sqgf"
        write_checkpoint(path, random_field(grid32), 1.0, 0.0)
        assert diff_checkpoints(path, path) == 0.0

    @pytest.mark.parametrize("gamma", [0.5, 1.0])
    def test_one_linear_step(self, tmp_path, gamma):
        """One step of a linear-only run scales each mode by ``exp(-|xi|^gamma dt)``."""
        g = GridSpec(32)
        amplitude, dt = 2.0, 1e-2
        theta0 = single_mode(g, 3, 4, amplitude)
        paths = []

        def keep(step, t, field):
            if step <= 1:
                paths.append(tmp_path / f"s{step}.sqgf")
                write_checkpoint(paths[-1], field, gamma, t)

        run_simulation(theta0, SolverConfig(g, gamma, dt, 5 * dt, linear_only=True), diagnostics=False,
                       callback=keep)
        expected = abs(np.exp(-(5.0**gamma) * dt) - 1.0) * np.max(np.abs(theta0.coeffs))
        assert diff_checkpoints(*paths) == pytest.approx(expected, rel=1e-12)


class TestHashes:
    def test_git_blob_hash_matches_git(self):
        # `printf 'hello\n' | git hash-object --stdin`
        assert git_blob_hash(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"

    def test_empty_blob(self):
        assert git_blob_hash(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"

    def test_sha256_file(self, tmp_path):
        data = bytes(range(256)) * 5000
        (tmp_path / "x").write_bytes(data)
        assert sha256_file(tmp_path / "x") == hashlib.sha256(data).hexdigest()
