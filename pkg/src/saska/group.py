"""Modular arithmetic over a prime-order subgroup and Diffie-Hellman shares.

All group elements live in the order-q subgroup of the multiplicative group
mod p, where p and q are prime and q | p - 1.  Parameters are static,
publicly known configuration: both peers load the same named set (or the
same parameter file) out of band.
"""

from __future__ import annotations

import functools
import hashlib
import random
import secrets
from dataclasses import dataclass

from .errors import (
    BadGenerator,
    NotPrime,
    OrderMismatch,
    RngFailure,
    SubgroupCheckFailed,
)

PRIMALITY_ROUNDS = 64

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)


@dataclass(frozen=True)
class DhParams:
    """Public group triple (p, q, g).  Construct via validate_params()."""

    p: int
    q: int
    g: int

    def set_id(self) -> int:
        """32-bit identifier carried on the wire to detect mismatched sets."""
        return _params_set_id(self)


@dataclass(frozen=True)
class PrivateShare:
    """Secret exponent in [1, q-1]."""

    exponent: int


@dataclass(frozen=True)
class PublicShare:
    """Group element g^exponent mod p."""

    value: int


@dataclass(frozen=True)
class SessionKey:
    """Shared secret, as a group element and its canonical octet encoding."""

    value: int
    octets: bytes


def int_to_octets(n: int) -> bytes:
    """Minimal big-endian encoding; at least one octet."""
    return n.to_bytes(max(1, (n.bit_length() + 7) // 8), "big")


@functools.lru_cache(maxsize=None)
def _params_set_id(params: DhParams) -> int:
    h = hashlib.sha256()
    for n in (params.p, params.q, params.g):
        enc = int_to_octets(n)
        h.update(len(enc).to_bytes(2, "big"))
        h.update(enc)
    return int.from_bytes(h.digest()[:4], "big")


def mod_exp(base: int, exponent: int, modulus: int) -> int:
    """base^exponent mod modulus for non-negative exponent, 0 <= base < modulus."""
    if modulus < 2:
        raise ValueError(f"modulus must be >= 2, got {modulus}")
    if exponent < 0:
        raise ValueError(f"exponent must be >= 0, got {exponent}")
    if not 0 <= base < modulus:
        raise ValueError(f"base must lie in [0, modulus), got {base}")
    return pow(base, exponent, modulus)


def is_probable_prime(n: int, rounds: int = PRIMALITY_ROUNDS) -> bool:
    """Miller-Rabin with random bases; error probability <= 4**-rounds."""
    if n < 2:
        return False
    for sp in _SMALL_PRIMES:
        if n == sp:
            return True
        if n % sp == 0:
            return False
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    rng = secrets.SystemRandom()
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def validate_params(p: int, q: int, g: int) -> DhParams:
    """Check the subgroup structure and return a validated parameter triple.

    Raises NotPrime, OrderMismatch, or BadGenerator when (p, q, g) does not
    describe a generator of the order-q subgroup of Z_p*.
    """
    if p <= 0 or q <= 0 or g <= 0:
        raise ValueError("p, q, g must be positive integers")
    if not is_probable_prime(p):
        raise NotPrime(p, "p")
    if not is_probable_prime(q):
        raise NotPrime(q, "q")
    if (p - 1) % q != 0:
        raise OrderMismatch(p, q)
    if not 1 < g < p:
        raise BadGenerator(g, "generator must lie in (1, p)")
    if pow(g, q, p) != 1:
        raise BadGenerator(g, "g^q mod p != 1, not in the order-q subgroup")
    return DhParams(p, q, g)


def in_subgroup(params: DhParams, value: int) -> bool:
    """Membership test for the order-q subgroup, excluding the identity."""
    if not 1 < value < params.p:
        return False
    return pow(value, params.q, params.p) == 1


def gen_private_share(params: DhParams, rng: random.Random | None = None) -> PrivateShare:
    """Draw an exponent uniformly from [1, q-1].

    rng defaults to the OS entropy source; pass a seeded random.Random only
    for simulation or tests.
    """
    rng = rng or secrets.SystemRandom()
    try:
        exponent = rng.randrange(1, params.q)
    except Exception as exc:
        raise RngFailure(str(exc)) from exc
    return PrivateShare(exponent)


def pub_share(params: DhParams, priv: PrivateShare) -> PublicShare:
    return PublicShare(pow(params.g, priv.exponent, params.p))


def derive_key(params: DhParams, peer_pub: PublicShare, priv: PrivateShare) -> SessionKey:
    """peer_pub^exponent mod p, with a subgroup membership check first.

    The check rejects shares outside the order-q subgroup (identity
    included), which an active attacker could use for small-subgroup
    confinement.
    """
    if not in_subgroup(params, peer_pub.value):
        raise SubgroupCheckFailed(f"peer share {peer_pub.value} is not a valid subgroup element")
    value = pow(peer_pub.value, priv.exponent, params.p)
    return SessionKey(value, int_to_octets(value))


# Built-in parameter sets.  "test" is for unit tests and fast simulation
# only; "p40" is a 40-decimal-digit (133-bit) safe-prime group matching the
# scale the protocol was designed around; "modp2048" is the RFC 3526
# group 14 prime with the order-q subgroup generated by 2 (p = 7 mod 8, so
# 2 is a quadratic residue).  In the safe-prime sets q = (p-1)/2.

_P40 = 7005093198389998018690405618836744543707

_MODP2048 = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)

PARAM_SETS: dict[str, DhParams] = {
    "test": DhParams(p=23, q=11, g=2),
    "p40": DhParams(p=_P40, q=(_P40 - 1) // 2, g=4),
    "modp2048": DhParams(p=_MODP2048, q=(_MODP2048 - 1) // 2, g=2),
}

DEFAULT_PARAM_SET = "p40"


def named_params(name: str) -> DhParams:
    try:
        return PARAM_SETS[name]
    except KeyError:
        raise KeyError(f"unknown parameter set {name!r}; known: {sorted(PARAM_SETS)}") from None


def parse_params_text(text: str) -> DhParams:
    """Parse and validate a parameter file: decimal p, q, g, one per line.

    Blank lines and '#' comments are ignored.
    """
    values = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            values.append(int(line, 10))
        except ValueError:
            raise ValueError(f"expected a decimal integer, got {line!r}") from None
    if len(values) != 3:
        raise ValueError(f"parameter file must hold exactly 3 integers (p, q, g), got {len(values)}")
    return validate_params(*values)


def load_params_file(path: str) -> DhParams:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_params_text(fh.read())
