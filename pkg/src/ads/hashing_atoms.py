"""
Hashing Atoms - Salted, Domain-Separated Digests
================================================

Pure hash primitives used by every layer of the store:

- make_salt packs (version, depth) into the 8-byte salt word
- hash_data digests raw key and value bytes (unsalted)
- hash_leaf / hash_internal digest tree nodes, salted by version and depth
- batch_hash digests many jobs at once; its output is defined to equal
  sequential hashing, and batch_hash_scalar is that sequential oracle

Hash functions are pluggable through HashFunction. blake2s is the default
because it takes the 8-byte salt natively; functions without a salt input
(sha256) have the salt prepended to the hashed bytes instead.
"""

import hashlib
import struct
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Optional, Sequence

from .config_atoms import HASH_LANE_WIDTH, HASH_SIZE, LEAF_DEPTH, MAX_VERSION
from .errors import HashDomainError

_SALT_WORD = struct.Struct("<Q")

# One hash job: (salt or None for unsalted, input bytes)
HashJob = tuple[Optional[bytes], bytes]


# =============================================================================
# ATOMS - Hash function registry
# =============================================================================


@dataclass(frozen=True)
class HashFunction:
    """
    A 256-bit hash function usable for every digest in the store.

    Attributes:
        name: Registry name recorded in configs and reports
        ident: Numeric identifier recorded in snapshot and proof headers
        native_salt: Whether the salt goes into the function's own salt input
        factory: Builds a fresh hashlib-style state for an optional salt
    """

    name: str
    ident: int
    native_salt: bool
    factory: Callable[[Optional[bytes]], Any]

    def new(self, salt: Optional[bytes] = None):
        """Return a fresh hash state, already primed with the salt."""
        return self.factory(salt)

    def digest(self, data: bytes, salt: Optional[bytes] = None) -> bytes:
        """Digest data under an optional 8-byte salt."""
        state = self.factory(salt)
        state.update(data)
        return state.digest()


def _blake2s_state(salt: Optional[bytes]):
    if salt is None:
        return hashlib.blake2s(digest_size=HASH_SIZE)
    return hashlib.blake2s(digest_size=HASH_SIZE, salt=salt)


def _sha256_state(salt: Optional[bytes]):
    state = hashlib.sha256()
    if salt is not None:
        state.update(salt)
    return state


BLAKE2S = HashFunction(name="blake2s", ident=1, native_salt=True, factory=_blake2s_state)
SHA256 = HashFunction(name="sha256", ident=2, native_salt=False, factory=_sha256_state)

DEFAULT_HASH = BLAKE2S

_REGISTRY: dict[str, HashFunction] = {fn.name: fn for fn in (BLAKE2S, SHA256)}


def get_hash_function(name_or_ident: str | int) -> HashFunction:
    """
    Look up a registered hash function by name or numeric identifier.

    Raises:
        HashDomainError: If nothing is registered under that name or id
    """
    if isinstance(name_or_ident, str):
        fn = _REGISTRY.get(name_or_ident.lower())
    else:
        fn = next((f for f in _REGISTRY.values() if f.ident == name_or_ident), None)

    if fn is None:
        raise HashDomainError(f"Unknown hash function: {name_or_ident!r}")
    return fn


def available_hash_functions() -> list[str]:
    """Names of every registered hash function, default first."""
    return [DEFAULT_HASH.name] + sorted(n for n in _REGISTRY if n != DEFAULT_HASH.name)


# =============================================================================
# ATOMS - Salts and key bits
# =============================================================================


def make_salt(version: int, depth: int) -> bytes:
    """
    Pack a version and a depth into the 8-byte salt word.

    The word is (version << 12) | depth, little-endian.

    Args:
        version: 52-bit version
        depth: 12-bit depth, 0xfff being the leaf level

    Returns:
        Eight salt bytes

    Raises:
        HashDomainError: If version or depth is out of range

    Examples:
        >>> make_salt(1, 0).hex()
        '0010000000000000'
    """
    if not 0 <= version <= MAX_VERSION:
        raise HashDomainError(f"Version {version} outside [0, 2^52)")
    if not 0 <= depth <= LEAF_DEPTH:
        raise HashDomainError(f"Depth {depth} outside [0, 0xfff]")
    return _SALT_WORD.pack((version << 12) | depth)


def key_bit(key_hash: bytes, depth: int) -> int:
    """
    Extract branching bit `depth` of a key hash.

    Bit d lives in byte d // 8 at position d % 8, least significant first.
    """
    return (key_hash[depth >> 3] >> (depth & 7)) & 1


def first_differing_bit(a: bytes, b: bytes) -> Optional[int]:
    """
    Return the lowest bit index at which two digests differ.

    Returns:
        Bit index in extraction order, or None if the digests are equal
    """
    diff = int.from_bytes(a, "little") ^ int.from_bytes(b, "little")
    if diff == 0:
        return None
    return (diff & -diff).bit_length() - 1


# =============================================================================
# ATOMS - Digests
# =============================================================================


def hash_data(data: bytes, hash_fn: HashFunction = DEFAULT_HASH) -> bytes:
    """Unsalted digest of raw key or value bytes."""
    return hash_fn.digest(data)


def new_data_hasher(hash_fn: HashFunction = DEFAULT_HASH):
    """Incremental unsalted hasher; its digest equals hash_data of the fed bytes."""
    return hash_fn.new(None)


def hash_leaf(
    key_hash: bytes,
    value_hash: bytes,
    version: int,
    hash_fn: HashFunction = DEFAULT_HASH,
) -> bytes:
    """
    Digest a leaf: H(salt(version, 0xfff), key_hash || value_hash).

    The key hash is part of the leaf digest so a value cannot be replanted
    under a sibling key.
    """
    return hash_fn.digest(key_hash + value_hash, make_salt(version, LEAF_DEPTH))


def hash_internal(
    left: bytes,
    right: bytes,
    version: int,
    depth: int,
    hash_fn: HashFunction = DEFAULT_HASH,
) -> bytes:
    """
    Digest an internal node: H(salt(version, depth), left || right).

    Operand order is the tree position and is never normalized.

    Raises:
        HashDomainError: If depth is the reserved leaf level or out of range
    """
    if depth >= LEAF_DEPTH:
        raise HashDomainError(f"Internal nodes cannot use depth {depth:#x}")
    return hash_fn.digest(left + right, make_salt(version, depth))


def batch_hash_scalar(
    jobs: Iterable[HashJob],
    hash_fn: HashFunction = DEFAULT_HASH,
) -> list[bytes]:
    """Hash each job on its own, in order. Conformance oracle for batch_hash."""
    return [hash_fn.digest(data, salt) for salt, data in jobs]


def batch_hash(
    jobs: Sequence[HashJob],
    hash_fn: HashFunction = DEFAULT_HASH,
) -> list[bytes]:
    """
    Hash many jobs at once; output[i] equals hashing jobs[i] alone.

    Jobs are walked in lanes of HASH_LANE_WIDTH. Inside a lane, jobs sharing a
    salt start from one pre-salted state that is copied per job, which is the
    common case when rehashing a level of the tree (same version, same depth).

    Args:
        jobs: Ordered (salt, input bytes) pairs; inputs may differ in length
        hash_fn: Hash function to use

    Returns:
        Digests in job order
    """
    out: list[bytes] = []
    append = out.append
    for lane_start in range(0, len(jobs), HASH_LANE_WIDTH):
        primed: dict[Optional[bytes], object] = {}
        for salt, data in jobs[lane_start:lane_start + HASH_LANE_WIDTH]:
            base = primed.get(salt)
            if base is None:
                base = primed[salt] = hash_fn.new(salt)
            state = base.copy()
            state.update(data)
            append(state.digest())
    return out
