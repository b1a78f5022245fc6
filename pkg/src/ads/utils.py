"""
Store Utilities - Path and Formatting Atoms
===========================================

Pure helpers for path resolution (journal segments, snapshot files, run
reports) and for rendering digests, versions and rates in logs.
"""

import logging
from pathlib import Path

# Configure module logger
logger = logging.getLogger(__name__)


# =============================================================================
# ATOMS - Pure functions with no dependencies
# =============================================================================


def resolve_absolute_path(path: Path | str) -> Path:
    """
    Resolve a path to its absolute, canonical form.

    Args:
        path: A path as string or Path object

    Returns:
        Resolved absolute Path
    """
    if isinstance(path, str):
        path = Path(path)
    return path.resolve()


def get_project_root() -> Path:
    """
    Get the resolved repository root directory.

    This file is at src/ads/utils.py, so the root is 3 levels up.

    Returns:
        Absolute resolved path to the repository root
    """
    return Path(__file__).parent.parent.parent.resolve()


def short_hex(digest: bytes, width: int = 12) -> str:
    """
    Render the leading bytes of a digest for log lines.

    Args:
        digest: Any byte string
        width: Number of hex characters to keep

    Returns:
        Truncated lowercase hex string ("-" for an empty input)

    Examples:
        >>> short_hex(bytes(range(32)), 8)
        '00010203'
    """
    if not digest:
        return "-"
    return digest.hex()[:width]


def format_rate(count: int, seconds: float) -> str:
    """
    Format an operation rate for human-readable output.

    Args:
        count: Operations performed
        seconds: Wall time they took

    Returns:
        Rate such as "1.25M ups" or "830.0k ups"; "n/a" for zero time
    """
    if seconds <= 0:
        return "n/a"

    rate = count / seconds
    if rate >= 1_000_000:
        return f"{rate / 1_000_000:.2f}M ups"
    if rate >= 1_000:
        return f"{rate / 1_000:.1f}k ups"
    return f"{rate:.0f} ups"
