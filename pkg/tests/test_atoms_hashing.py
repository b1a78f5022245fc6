"""
Test Atoms: Hashing
===================

Tests for salts, key-bit extraction, leaf/internal digests and the batched
hashing path.
"""

import hashlib

import numpy as np
import pytest

from src.ads.config_atoms import LEAF_DEPTH, MAX_VERSION
from src.ads.errors import HashDomainError
from src.ads.hashing_atoms import (
    BLAKE2S,
    DEFAULT_HASH,
    SHA256,
    available_hash_functions,
    batch_hash,
    batch_hash_scalar,
    first_differing_bit,
    get_hash_function,
    hash_data,
    hash_internal,
    hash_leaf,
    key_bit,
    make_salt,
    new_data_hasher,
)


def _digest(rng: np.random.Generator) -> bytes:
    return rng.bytes(32)


class TestHashRegistry:
    """Tests for get_hash_function() and available_hash_functions()."""

    def test_default_is_blake2s(self):
        """blake2s is the default and is listed first."""
        assert DEFAULT_HASH is BLAKE2S
        assert available_hash_functions()[0] == "blake2s"
        assert "sha256" in available_hash_functions()

    def test_lookup_by_name_and_ident(self):
        """Hash functions resolve by case-insensitive name or numeric id."""
        assert get_hash_function("BLAKE2S") is BLAKE2S
        assert get_hash_function(1) is BLAKE2S
        assert get_hash_function("sha256") is SHA256
        assert get_hash_function(2) is SHA256

    def test_unknown_name_raises(self):
        """Unknown names and ids raise HashDomainError."""
        with pytest.raises(HashDomainError):
            get_hash_function("md5")
        with pytest.raises(HashDomainError):
            get_hash_function(99)


class TestHashData:
    """Tests for unsalted data digests."""

    def test_blake2s_golden_vectors(self):
        """hash_data matches published BLAKE2s-256 vectors."""
        assert hash_data(b"").hex() == "69217a3079908094e11121d042354a7c1f55b6482ca1a51e1b250dfd1ed0eef9"
        assert hash_data(b"abc").hex() == "508c5e8c327c14e2e1a72ba34eeb452f37458b209ed63a294d999b4c86675982"

    def test_sha256_golden_vector(self):
        """hash_data with sha256 matches the FIPS 180 vector."""
        assert hash_data(b"abc", SHA256).hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"

    def test_incremental_hasher_matches(self):
        """new_data_hasher() fed in pieces equals hash_data of the whole."""
        # Arrange
        hasher = new_data_hasher()

        # Act
        hasher.update(b"journal ")
        hasher.update(b"records")

        # Assert
        assert hasher.digest() == hash_data(b"journal records")


class TestMakeSalt:
    """Tests for make_salt()."""

    def test_packs_version_above_depth(self):
        """The salt word is (version << 12) | depth, little-endian."""
        assert make_salt(1, 0).hex() == "0010000000000000"
        assert make_salt(0, LEAF_DEPTH) == bytes.fromhex("ff0f000000000000")
        assert make_salt(MAX_VERSION, LEAF_DEPTH) == b"\xff" * 8
        assert len(make_salt(12345, 67)) == 8

    @pytest.mark.parametrize("version,depth", [(-1, 0), (MAX_VERSION + 1, 0), (0, -1), (0, LEAF_DEPTH + 1)])
    def test_out_of_range_raises(self, version: int, depth: int):
        """Versions beyond 52 bits and depths beyond 12 bits are rejected."""
        with pytest.raises(HashDomainError):
            make_salt(version, depth)


class TestKeyBits:
    """Tests for key_bit() and first_differing_bit()."""

    def test_bit_order_is_lsb_first_within_bytes(self):
        """Bit d is bit d % 8 of byte d // 8."""
        # Arrange
        key_hash = bytes([0b00000010, 0b10000000]) + bytes(30)

        # Assert
        assert key_bit(key_hash, 0) == 0
        assert key_bit(key_hash, 1) == 1
        assert key_bit(key_hash, 7) == 0
        assert key_bit(key_hash, 15) == 1
        assert key_bit(key_hash, 255) == 0

    def test_first_differing_bit(self):
        """The lowest differing bit index is found in extraction order."""
        a = bytes(32)
        b = bytes([0, 0, 0b00000100]) + bytes(29)
        c = bytes([0b10000000, 0, 0b00000100]) + bytes(29)

        assert first_differing_bit(a, a) is None
        assert first_differing_bit(a, b) == 18
        assert first_differing_bit(a, c) == 7
        assert first_differing_bit(b, c) == 7

    def test_first_differing_bit_agrees_with_key_bit(self):
        """Both digests agree below the differing bit and disagree at it."""
        rng = np.random.Generator(np.random.PCG64(7))
        for _ in range(200):
            a, b = _digest(rng), _digest(rng)
            d = first_differing_bit(a, b)
            assert all(key_bit(a, i) == key_bit(b, i) for i in range(d))
            assert key_bit(a, d) != key_bit(b, d)


class TestNodeDigests:
    """Tests for hash_leaf() and hash_internal()."""

    def test_leaf_uses_leaf_depth_salt(self):
        """A leaf digest is blake2s over key_hash || value_hash salted at depth 0xfff."""
        # Arrange
        key_hash, value_hash = hash_data(b"k"), hash_data(b"v")

        # Act
        digest = hash_leaf(key_hash, value_hash, 5)

        # Assert
        expected = hashlib.blake2s(key_hash + value_hash, digest_size=32, salt=make_salt(5, LEAF_DEPTH)).digest()
        assert digest == expected

    def test_leaf_binds_operand_order_and_version(self):
        """Swapping key and value hashes, or the version, changes the digest."""
        rng = np.random.Generator(np.random.PCG64(1))
        key_hash, value_hash = _digest(rng), _digest(rng)

        assert hash_leaf(key_hash, value_hash, 1) != hash_leaf(value_hash, key_hash, 1)
        assert hash_leaf(key_hash, value_hash, 1) != hash_leaf(key_hash, value_hash, 2)

    def test_internal_domain_separation(self):
        """Varying version, depth or operand order changes an internal digest."""
        rng = np.random.Generator(np.random.PCG64(2))
        for _ in range(50):
            left, right = _digest(rng), _digest(rng)
            base = hash_internal(left, right, 3, 10)
            assert base != hash_internal(left, right, 4, 10)
            assert base != hash_internal(left, right, 3, 11)
            assert base != hash_internal(right, left, 3, 10)

    def test_internal_rejects_leaf_depth(self):
        """Internal nodes cannot be salted with the reserved leaf depth."""
        with pytest.raises(HashDomainError):
            hash_internal(bytes(32), bytes(32), 1, LEAF_DEPTH)

    def test_sha256_prepends_salt(self):
        """Without a native salt input the salt is hashed ahead of the data."""
        salt = make_salt(9, 3)
        assert SHA256.digest(b"payload", salt) == hashlib.sha256(salt + b"payload").digest()

    def test_leaf_differs_between_hash_functions(self):
        """The same leaf under blake2s and sha256 digests differently."""
        assert hash_leaf(bytes(32), bytes(32), 1, BLAKE2S) != hash_leaf(bytes(32), bytes(32), 1, SHA256)


class TestBatchHash:
    """Tests for batch_hash() against the sequential oracle."""

    @staticmethod
    def _jobs(count: int, seed: int) -> list[tuple]:
        rng = np.random.Generator(np.random.PCG64(seed))
        salts = [None] + [make_salt(int(v), int(d)) for v, d in zip(rng.integers(0, 1 << 20, 6), rng.integers(0, 4095, 6))]
        jobs = []
        for _ in range(count):
            salt = salts[int(rng.integers(len(salts)))]
            jobs.append((salt, rng.bytes(int(rng.integers(0, 200)))))
        return jobs

    def test_matches_scalar_on_ten_thousand_jobs(self):
        """batch_hash equals one-by-one hashing over 10,000 heterogeneous jobs."""
        # Arrange
        jobs = self._jobs(10_000, seed=11)

        # Act
        batched = batch_hash(jobs)

        # Assert
        assert batched == batch_hash_scalar(jobs)
        assert len(batched) == 10_000

    def test_matches_scalar_with_sha256(self):
        """Conformance also holds for a hash without a native salt."""
        jobs = self._jobs(1_000, seed=12)
        assert batch_hash(jobs, SHA256) == batch_hash_scalar(jobs, SHA256)

    def test_repeated_salt_does_not_leak_state(self):
        """Jobs sharing a salt inside one lane still hash independently."""
        salt = make_salt(1, 1)
        jobs = [(salt, b"a"), (salt, b"b"), (salt, b"a")]

        digests = batch_hash(jobs)

        assert digests[0] == digests[2]
        assert digests[0] != digests[1]
        assert digests[0] == BLAKE2S.digest(b"a", salt)

    def test_empty_batch(self):
        """An empty job list yields no digests."""
        assert batch_hash([]) == []
