
import hashlib


def derive_seed(master: int, label: str) -> int:
    """Derive an independent 64-bit seed for one randomized stage.

    Each stage (``split``, ``init``, ``noise``) hashes its own label with the
    master seed, so changing how one stage draws never shifts another's stream.
    """
    digest = hashlib.sha256(f"{int(master)}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
