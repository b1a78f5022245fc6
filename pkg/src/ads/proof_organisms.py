"""
Proof Organisms - Traversal, Proofs and Verification
====================================================

traverse() walks a subtree's entry range backwards from its last entry,
guided by the key's bits:

- Key: remember its hash (k_f) and step back
- Leaf: record its version and stop
- Internal: jump to its tag when the key goes that way, otherwise push the
  entry as a path step and step back
- External: latch the first external on the key's side, stop when it
  pairs with the previous path step's depth, otherwise push and step back

build_proof() packages the walk with the bridge digests of the implicit
levels; verify() recomputes the global root from the proof alone and
classifies the key as included, excluded or living in an older version.
follow_redirect() resolves an ExternalVersion verdict with a proof from the
older snapshot, which must reveal the node the redirect names.
"""

import logging
import struct
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

from .config_atoms import (
    EMPTY_HASH,
    HASH_SIZE,
    LEAF_DEPTH,
    MAX_VERSION,
    PROOF_FORMAT_VERSION,
    PROOF_MAGIC,
)
from .dispatch_organisms import fold_bridge
from .entry_atoms import ENTRY_SIZE, EntryKind, decode_entry, encode_entry, external_entry, internal_entry
from .errors import (
    HashDomainError,
    InvalidProofError,
    JournalCorruptionError,
    ProofFormatError,
)
from .hashing_atoms import HashFunction, get_hash_function, hash_data, hash_internal, hash_leaf, key_bit
from .journal_molecules import Journal
from .snapshot_molecules import SnapshotFile, SubtreeEntries
from .topology_atoms import Topology, global_index
from .utils import short_hex

# Configure module logger
logger = logging.getLogger(__name__)

_HEADER = struct.Struct("<8sIIQBBBBI")
_ANCHOR = struct.Struct(f"<{HASH_SIZE}s{HASH_SIZE}sQ")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")

_FLAG_EXTERNAL = 0x1
_FLAG_VALUE = 0x2


# =============================================================================
# ATOMS - Proof data
# =============================================================================


@dataclass(frozen=True)
class PathStep:
    """
    One sibling on the path, in root-to-leaf order.

    Attributes:
        peer_hash: Digest of the sibling subtree
        is_right: Whether the sibling is the right child
        depth: Branching depth of the parent
        version_tag: Sibling version for external steps, 0 for internal ones
        external: Whether the step came from an External entry
    """

    peer_hash: bytes
    is_right: bool
    depth: int
    version_tag: int = 0
    external: bool = False


@dataclass(frozen=True)
class TraversalResult:
    """
    Outcome of walking one entry range.

    Attributes:
        path: Steps pushed, root-to-leaf
        external: First external version latched on the key's side
        final_key_hash: k_f when the walk ended at a Key/Leaf pair
        final_version: Leaf version, or the terminating external's version
        cursor: Index of the entry the walk stopped on
        key_offset: Key-region offset of the Key entry, if any
        anchor_hash: Hash field of the entry the walk stopped on
    """

    path: tuple[PathStep, ...]
    external: Optional[int]
    final_key_hash: Optional[bytes]
    final_version: int
    cursor: int
    key_offset: Optional[int]
    anchor_hash: bytes


class AnchorKind(Enum):
    EMPTY = 0
    LEAF = 1
    EXTERNAL = 2


@dataclass(frozen=True)
class Anchor:
    """
    Bottom of a proof path.

    LEAF carries (k_f, value hash, leaf version); EXTERNAL carries an older
    node's digest and version; EMPTY stands for an empty subtree.
    """

    kind: AnchorKind
    key_hash: bytes = EMPTY_HASH
    hash: bytes = EMPTY_HASH
    version: int = 0


@dataclass(frozen=True)
class Proof:
    """Self-contained statement about one key in one snapshot."""

    key: bytes
    snapshot_version: int
    hash_ident: int
    topology: Topology
    anchor: Anchor
    path: tuple[PathStep, ...]
    external: Optional[int]
    bridge: tuple[bytes, ...]
    root: bytes
    value: Optional[bytes] = None


class VerdictKind(Enum):
    INCLUSION = "inclusion"
    EXCLUSION = "exclusion"
    EXTERNAL_VERSION = "external_version"


@dataclass(frozen=True)
class Verdict:
    """
    Result of a successful verification.

    Attributes:
        kind: Inclusion, Exclusion or ExternalVersion
        version: Leaf version (Inclusion) or the older version to consult
            (ExternalVersion); None for Exclusion
        value: Disclosed value bytes, when the proof carried them
        redirect_hash: ExternalVersion only: digest of the unchanged node on
            the key's side
        redirect_depth: ExternalVersion only: branching depth of that node's
            parent (implicit_levels - 1 for a whole subtree)
    """

    kind: VerdictKind
    version: Optional[int] = None
    value: Optional[bytes] = None
    redirect_hash: Optional[bytes] = None
    redirect_depth: Optional[int] = None


# =============================================================================
# MOLECULES - Traversal
# =============================================================================


def traverse(key_hash: bytes, subtree: SubtreeEntries) -> TraversalResult:
    """
    Walk a subtree entry range for `key_hash`.

    The cursor strictly decreases (jumps must go backward), so every entry
    is visited at most once.

    Raises:
        ProofFormatError: On cursor underflow, a forward or out-of-range
            jump, or Key/Leaf entries out of pairing
    """
    entries = subtree.entries
    start = subtree.start
    if not entries:
        raise ProofFormatError(f"Subtree {subtree.index} has no entries to traverse")

    cursor = subtree.end - 1
    path: list[PathStep] = []
    external: Optional[int] = None
    final_key_hash: Optional[bytes] = None
    key_offset: Optional[int] = None

    while True:
        if cursor < start:
            raise ProofFormatError(f"Cursor ran below subtree {subtree.index}'s first entry")
        item = entries[cursor - start]
        kind = item.kind

        if kind is EntryKind.KEY:
            if final_key_hash is not None:
                raise ProofFormatError(f"Entry {cursor}: two Key entries in a row")
            final_key_hash = item.hash
            key_offset = item.tag
            cursor -= 1
            continue

        if kind is EntryKind.LEAF:
            if final_key_hash is None:
                raise ProofFormatError(f"Entry {cursor}: Leaf without its Key")
            return TraversalResult(tuple(path), external, final_key_hash, item.tag, cursor, key_offset, item.hash)

        if final_key_hash is not None:
            raise ProofFormatError(f"Entry {cursor}: Key not followed by its Leaf")

        goes_right = key_bit(key_hash, item.depth)
        if kind is EntryKind.INTERNAL:
            if goes_right == int(item.is_right):
                if not start <= item.tag < cursor:
                    raise ProofFormatError(f"Entry {cursor}: jump to {item.tag} does not go backward")
                cursor = item.tag
            else:
                path.append(PathStep(item.hash, item.is_right, item.depth, 0, False))
                cursor -= 1
            continue

        # External
        if goes_right == int(item.is_right) and external is None:
            external = item.tag
        if path and path[-1].depth == item.depth:
            return TraversalResult(tuple(path), external, None, item.tag, cursor, None, item.hash)
        path.append(PathStep(item.hash, item.is_right, item.depth, item.tag, True))
        cursor -= 1


def build_proof(key: bytes, snapshot: SnapshotFile, journal: Optional[Journal] = None) -> Proof:
    """
    Build a proof for `key` against a snapshot's root.

    Args:
        key: Key bytes
        snapshot: Loaded snapshot
        journal: Journal of the owning shard; when given, an inclusion
            proof also carries the value bytes
    """
    hash_fn = snapshot.hash_fn
    topology = snapshot.topology
    key_hash = hash_data(key, hash_fn)
    index = global_index(key_hash, topology)
    record = snapshot.directory[index]
    bridge = tuple(snapshot.bridge(index))

    key_offset: Optional[int] = None
    if record.count == 0:
        path: tuple[PathStep, ...] = ()
        if record.root_hash == EMPTY_HASH:
            anchor = Anchor(AnchorKind.EMPTY)
            external = None
        else:
            anchor = Anchor(AnchorKind.EXTERNAL, hash=record.root_hash, version=record.root_version)
            external = record.root_version
    else:
        walk = traverse(key_hash, snapshot.read_entries(index))
        path = walk.path
        external = walk.external
        key_offset = walk.key_offset
        if walk.final_key_hash is not None:
            anchor = Anchor(AnchorKind.LEAF, walk.final_key_hash, walk.anchor_hash, walk.final_version)
        else:
            anchor = Anchor(AnchorKind.EXTERNAL, hash=walk.anchor_hash, version=walk.final_version)

    value = None
    if journal is not None and anchor.kind is AnchorKind.LEAF and anchor.key_hash == key_hash and external is None:
        stored_key, value_offset = snapshot.key_record(key_offset)
        journal_key, value = journal.read(anchor.version, value_offset)
        if journal_key != key or stored_key != key:
            raise JournalCorruptionError(
                f"Journal record at {value_offset} does not hold key {key[:8].hex()}",
                anchor.version,
                value_offset,
            )

    logger.debug(f"Built proof for {short_hex(key)} in snapshot {snapshot.version}: {anchor.kind.name}, {len(path)} steps")
    return Proof(
        key=key,
        snapshot_version=snapshot.version,
        hash_ident=hash_fn.ident,
        topology=topology,
        anchor=anchor,
        path=path,
        external=external,
        bridge=bridge,
        root=snapshot.root,
        value=value,
    )


# =============================================================================
# ORGANISMS - Verification
# =============================================================================


def verify(proof: Proof, trusted_root: bytes) -> Verdict:
    """
    Recompute the global root from `proof` and classify its key.

    Only the proof and the trusted root are read.

    Raises:
        InvalidProofError: If any check fails or the recomputed root differs
            from `trusted_root`; never reported as Exclusion
    """
    try:
        hash_fn = get_hash_function(proof.hash_ident)
    except HashDomainError as e:
        raise InvalidProofError(str(e)) from e

    topology = proof.topology
    snapshot_version = proof.snapshot_version
    anchor = proof.anchor
    if not 0 <= snapshot_version <= MAX_VERSION:
        raise InvalidProofError(f"snapshot version {snapshot_version} out of range")
    if len(proof.bridge) != topology.implicit_levels:
        raise InvalidProofError("bridge length does not match the topology")

    key_hash = hash_data(proof.key, hash_fn)

    # Root-to-leaf checks; derive the latched external
    latch: Optional[int] = None
    redirect_hash: Optional[bytes] = None
    redirect_depth: Optional[int] = None
    previous_depth = topology.implicit_levels - 1
    for step in proof.path:
        if step.depth <= previous_depth or step.depth >= LEAF_DEPTH:
            raise InvalidProofError(f"step depth {step.depth} out of order")
        previous_depth = step.depth
        if step.external and step.version_tag >= snapshot_version:
            raise InvalidProofError(f"external step version {step.version_tag} is not older than the snapshot")
        if not step.external and step.version_tag != 0:
            raise InvalidProofError("internal step carries a version")
        if int(step.is_right) == key_bit(key_hash, step.depth):
            if not step.external:
                raise InvalidProofError(f"internal sibling at depth {step.depth} sits on the key's side")
            if latch is None:
                latch = step.version_tag
                redirect_hash = step.peer_hash
                redirect_depth = step.depth

    if anchor.kind is not AnchorKind.LEAF and anchor.key_hash != EMPTY_HASH:
        raise InvalidProofError("non-leaf anchor carries a key hash")
    if anchor.kind is AnchorKind.LEAF:
        for step in proof.path:
            if int(step.is_right) == key_bit(anchor.key_hash, step.depth):
                raise InvalidProofError(f"leaf key hash disagrees with the path at depth {step.depth}")
        digest = hash_leaf(anchor.key_hash, anchor.hash, anchor.version, hash_fn)
        version = anchor.version
    elif anchor.kind is AnchorKind.EXTERNAL:
        if anchor.version >= snapshot_version:
            raise InvalidProofError(f"external anchor version {anchor.version} is not older than the snapshot")
        digest = anchor.hash
        version = anchor.version
        if latch is None:
            latch = anchor.version
            redirect_hash = anchor.hash
            redirect_depth = proof.path[-1].depth if proof.path else topology.implicit_levels - 1
    else:
        if proof.path or anchor != Anchor(AnchorKind.EMPTY):
            raise InvalidProofError("empty anchor with a path or payload")
        digest = EMPTY_HASH
        version = 0

    if version > snapshot_version:
        raise InvalidProofError(f"anchor version {version} is newer than the snapshot")

    # Leaf-to-root fold
    for step in reversed(proof.path):
        version = max(version, step.version_tag)
        if step.is_right:
            digest = hash_internal(digest, step.peer_hash, version, step.depth, hash_fn)
        else:
            digest = hash_internal(step.peer_hash, digest, version, step.depth, hash_fn)

    index = global_index(key_hash, topology)
    root = fold_bridge(digest, index, proof.bridge, snapshot_version, topology, hash_fn)
    if root != trusted_root:
        raise InvalidProofError("recomputed root does not match the trusted root")
    if proof.root != trusted_root:
        raise InvalidProofError("claimed root does not match the trusted root")
    if proof.external != latch:
        raise InvalidProofError(f"claimed external {proof.external} differs from derived {latch}")

    included = anchor.kind is AnchorKind.LEAF and anchor.key_hash == key_hash and latch is None
    if proof.value is not None:
        if not included:
            raise InvalidProofError("value disclosed for a key that is not included")
        if hash_data(proof.value, hash_fn) != anchor.hash:
            raise InvalidProofError("disclosed value does not match the leaf's value hash")

    if latch is not None:
        return Verdict(VerdictKind.EXTERNAL_VERSION, latch, redirect_hash=redirect_hash, redirect_depth=redirect_depth)
    if included:
        return Verdict(VerdictKind.INCLUSION, anchor.version, proof.value)
    return Verdict(VerdictKind.EXCLUSION)


class _ExposedNode(NamedTuple):
    """A node whose digest a verified proof reveals."""

    digest: bytes
    on_key_path: bool
    # Shallowest step depth inside the node; None when the proof shows no steps below it
    inner_depth: Optional[int]


def _exposed_nodes(proof: Proof, key_hash: bytes, hash_fn: HashFunction) -> list[_ExposedNode]:
    """
    Every node digest the proof reveals, root side first.

    The nodes the fold passes through (the subtree root down to the anchor)
    and every sibling. A node is on the key's path until the first sibling
    on the key's side; that sibling is the last node on the path.
    """
    anchor = proof.anchor
    if anchor.kind is AnchorKind.LEAF:
        digest = hash_leaf(anchor.key_hash, anchor.hash, anchor.version, hash_fn)
    elif anchor.kind is AnchorKind.EXTERNAL:
        digest = anchor.hash
    else:
        digest = EMPTY_HASH
    version = anchor.version

    # below[j] is the node under path[j - 1]; below[0] is the subtree root
    below = [digest] * (len(proof.path) + 1)
    for j in range(len(proof.path) - 1, -1, -1):
        step = proof.path[j]
        version = max(version, step.version_tag)
        if step.is_right:
            digest = hash_internal(digest, step.peer_hash, version, step.depth, hash_fn)
        else:
            digest = hash_internal(step.peer_hash, digest, version, step.depth, hash_fn)
        below[j] = digest

    exposed: list[_ExposedNode] = []
    on_path = True
    for j, step in enumerate(proof.path):
        exposed.append(_ExposedNode(below[j], on_path, step.depth))
        key_side = int(step.is_right) == key_bit(key_hash, step.depth)
        exposed.append(_ExposedNode(step.peer_hash, on_path and key_side, None))
        if key_side:
            on_path = False
    exposed.append(_ExposedNode(below[-1], on_path, None))
    return exposed


def follow_redirect(key: bytes, redirect: Verdict, older: Proof, older_root: bytes) -> Verdict:
    """
    Resolve an ExternalVersion verdict with a proof from the older snapshot.

    The redirect names a node that has not changed since the older version
    and holds the key's side of the newer tree. The older proof must reveal
    that node:
    - on the key's path there: the older verdict holds (and may redirect
      again, further back)
    - off the key's path: no key below it can be `key`, so Exclusion

    Args:
        key: Key both proofs are about
        redirect: ExternalVersion verdict from the newer snapshot
        older: Proof for `key` from the snapshot `redirect.version` names
        older_root: Trusted root of that version

    Raises:
        InvalidProofError: If the older proof is for another key or version,
            does not verify, or never reveals the redirect node
    """
    if redirect.kind is not VerdictKind.EXTERNAL_VERSION or redirect.redirect_hash is None:
        raise InvalidProofError("only an ExternalVersion verdict with its node can be followed")
    if older.key != key:
        raise InvalidProofError("older proof is for another key")
    if older.snapshot_version != redirect.version:
        raise InvalidProofError(f"redirect names version {redirect.version}, proof is from {older.snapshot_version}")

    verdict = verify(older, older_root)
    hash_fn = get_hash_function(older.hash_ident)
    for node in _exposed_nodes(older, hash_data(key, hash_fn), hash_fn):
        if node.digest != redirect.redirect_hash:
            continue
        if node.inner_depth is not None and node.inner_depth <= redirect.redirect_depth:
            raise InvalidProofError(
                f"redirect node branches at depth {node.inner_depth}, above its parent's depth {redirect.redirect_depth}"
            )
        if node.on_key_path:
            return verdict
        logger.debug(f"Redirect node {short_hex(node.digest)} is off {short_hex(key)}'s path in version {older.snapshot_version}")
        return Verdict(VerdictKind.EXCLUSION)

    raise InvalidProofError(
        f"redirect node {short_hex(redirect.redirect_hash)} does not appear in the version {older.snapshot_version} proof"
    )


# =============================================================================
# ORGANISMS - Wire format
# =============================================================================


def _step_entry(step: PathStep):
    if step.external:
        return external_entry(step.peer_hash, step.version_tag, step.depth, step.is_right)
    return internal_entry(step.peer_hash, step.version_tag, step.depth, step.is_right, False)


def encode_proof(proof: Proof) -> bytes:
    """Canonical byte encoding, ending in a hash_data checksum."""
    hash_fn = get_hash_function(proof.hash_ident)
    flags = (_FLAG_EXTERNAL if proof.external is not None else 0) | (_FLAG_VALUE if proof.value is not None else 0)
    body = bytearray(
        _HEADER.pack(
            PROOF_MAGIC,
            PROOF_FORMAT_VERSION,
            proof.hash_ident,
            proof.snapshot_version,
            proof.topology.shard_bits,
            proof.topology.subtree_bits,
            proof.anchor.kind.value,
            flags,
            len(proof.path),
        )
    )
    body += _U32.pack(len(proof.key)) + proof.key
    body += _ANCHOR.pack(proof.anchor.key_hash, proof.anchor.hash, proof.anchor.version)
    body += _U64.pack(proof.external or 0)
    for step in proof.path:
        body += encode_entry(_step_entry(step), ProofFormatError)
    for digest in proof.bridge:
        body += digest
    body += proof.root
    if proof.value is not None:
        body += _U32.pack(len(proof.value)) + proof.value
    body += hash_data(bytes(body), hash_fn)
    return bytes(body)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise ProofFormatError("Proof bytes are truncated")
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: struct.Struct) -> tuple:
        return fmt.unpack(self.take(fmt.size))


def decode_proof(data: bytes) -> Proof:
    """
    Decode a proof produced by encode_proof.

    Raises:
        ProofFormatError: On any malformed, non-canonical or corrupted input
    """
    if len(data) < _HEADER.size + HASH_SIZE:
        raise ProofFormatError(f"Proof of {len(data)} bytes is too short")
    reader = _Reader(data)
    magic, fmt, hash_ident, snapshot_version, shard_bits, subtree_bits, anchor_kind, flags, path_len = reader.unpack(_HEADER)
    if magic != PROOF_MAGIC:
        raise ProofFormatError("Not a proof (bad magic)")
    if fmt != PROOF_FORMAT_VERSION:
        raise ProofFormatError(f"Unsupported proof format {fmt}")
    try:
        hash_fn = get_hash_function(hash_ident)
        topology = Topology(shard_bits, subtree_bits)
        kind = AnchorKind(anchor_kind)
    except (HashDomainError, ValueError) as e:
        raise ProofFormatError(str(e)) from e

    if hash_data(data[:-HASH_SIZE], hash_fn) != data[-HASH_SIZE:]:
        raise ProofFormatError("Proof checksum mismatch")
    if flags & ~(_FLAG_EXTERNAL | _FLAG_VALUE):
        raise ProofFormatError(f"Unknown proof flags {flags:#x}")

    (key_len,) = reader.unpack(_U32)
    key = reader.take(key_len)
    key_hash, anchor_hash, anchor_version = reader.unpack(_ANCHOR)
    anchor = Anchor(kind, key_hash, anchor_hash, anchor_version)
    if kind is not AnchorKind.LEAF and key_hash != EMPTY_HASH:
        raise ProofFormatError("Non-leaf anchor carries a key hash")
    if kind is AnchorKind.EMPTY and anchor != Anchor(AnchorKind.EMPTY):
        raise ProofFormatError("Empty anchor carries a payload")

    (external_word,) = reader.unpack(_U64)
    if flags & _FLAG_EXTERNAL:
        external: Optional[int] = external_word
    elif external_word:
        raise ProofFormatError("External version present without its flag")
    else:
        external = None

    path = []
    for _ in range(path_len):
        entry = decode_entry(reader.take(ENTRY_SIZE), 0, ProofFormatError)
        if entry.kind not in (EntryKind.INTERNAL, EntryKind.EXTERNAL) or entry.next_is_leaf:
            raise ProofFormatError(f"Path step of kind {entry.kind.name} is not a branch")
        path.append(PathStep(entry.hash, entry.is_right, entry.depth, entry.tag, entry.kind is EntryKind.EXTERNAL))

    bridge = tuple(reader.take(HASH_SIZE) for _ in range(topology.implicit_levels))
    root = reader.take(HASH_SIZE)
    value = None
    if flags & _FLAG_VALUE:
        (value_len,) = reader.unpack(_U32)
        value = reader.take(value_len)
    reader.take(HASH_SIZE)
    if reader.pos != len(data):
        raise ProofFormatError(f"{len(data) - reader.pos} trailing bytes after the proof")

    return Proof(key, snapshot_version, hash_ident, topology, anchor, tuple(path), external, bridge, root, value)
