"""Hash-based commitment scheme.

commit() maps an octet string m to a (c, d) pair where c = H(TAG || nonce
|| m) with a 256-bit random nonce.  Binding comes from collision resistance
of H, hiding from the unpredictability of the nonce.  open_commitment()
returns m only when the digest matches in full; truncated comparison is
deliberately not offered.
"""

from __future__ import annotations

import hashlib
import hmac
import random
import secrets
from dataclasses import dataclass

from .errors import EmptyMessage, OpenFailed, RngFailure

# Fixed 8-octet ASCII domain separation tag; both peers use it implicitly,
# preventing digests from being replayed across protocols.
DOMAIN_TAG = b"SASKA-01"

DIGEST_LEN = 32
NONCE_LEN = 32
DEFAULT_HASH = "sha256"


@dataclass(frozen=True)
class Commitment:
    digest: bytes

    def __post_init__(self):
        if len(self.digest) != DIGEST_LEN:
            raise ValueError(f"commitment digest must be {DIGEST_LEN} octets, got {len(self.digest)}")


@dataclass(frozen=True)
class Decommitment:
    nonce: bytes
    message: bytes


def _digest(nonce: bytes, message: bytes, hash_name: str) -> bytes:
    h = hashlib.new(hash_name)
    if h.digest_size != DIGEST_LEN:
        raise ValueError(f"hash {hash_name!r} has a {h.digest_size}-octet digest; need {DIGEST_LEN}")
    h.update(DOMAIN_TAG)
    h.update(nonce)
    h.update(message)
    return h.digest()


def commit(
    message: bytes,
    rng: random.Random | None = None,
    hash_name: str = DEFAULT_HASH,
) -> tuple[Commitment, Decommitment]:
    """Produce the commit/open pair for a non-empty octet string."""
    if not message:
        raise EmptyMessage("cannot commit to an empty message")
    rng = rng or secrets.SystemRandom()
    try:
        nonce = rng.getrandbits(NONCE_LEN * 8).to_bytes(NONCE_LEN, "big")
    except Exception as exc:
        raise RngFailure(str(exc)) from exc
    return Commitment(_digest(nonce, message, hash_name)), Decommitment(nonce, message)


def open_commitment(
    commitment: Commitment,
    decommitment: Decommitment,
    hash_name: str = DEFAULT_HASH,
) -> bytes:
    """Return the committed message, or raise OpenFailed on any mismatch."""
    expected = _digest(decommitment.nonce, decommitment.message, hash_name)
    if not hmac.compare_digest(expected, commitment.digest):
        raise OpenFailed("commitment digest mismatch")
    return decommitment.message
