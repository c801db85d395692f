"""Three-message pairing protocol with short-authentication-string checking.

Message flow (initiator A, responder B):

    A -> B   Msg1: commitment c over A's encoded payload
    B -> A   Msg2: B's payload in the clear (identity, public share, nonce)
    A -> B   Msg3: decommitment d revealing A's payload

Both sides then derive the k-bit authentication string S = N_A xor N_B and
display it; the session key is computed only after the local operator
confirms the strings match.  Because A commits to N_A before seeing N_B,
and B reveals N_B before seeing N_A, an active attacker must fix its own
nonce while one honest nonce is still hidden.
"""

from __future__ import annotations

import hashlib
import random
import secrets
from dataclasses import dataclass, field
from enum import Enum, IntEnum

from .commitment import (
    DIGEST_LEN,
    NONCE_LEN,
    Commitment,
    Decommitment,
    commit,
    open_commitment,
)
from .errors import (
    LengthMismatch,
    MalformedMessage,
    RngFailure,
    SubgroupCheckFailed,
    WrongPhase,
)
from .group import (
    DhParams,
    PrivateShare,
    PublicShare,
    SessionKey,
    derive_key,
    gen_private_share,
    in_subgroup,
    int_to_octets,
    pub_share,
)

DEFAULT_K = 20
MAX_K = 64
MAX_IDENTITY_OCTETS = 64

# Frame layout: [1-octet tag][4-octet big-endian body length][body].
TAG_COMMIT = 0x01
TAG_PAYLOAD = 0x02
TAG_DECOMMIT = 0x03
HEADER_LEN = 5
MAX_BODY = 65535

DEFAULT_TIMEOUT = 30.0  # seconds per awaited message


@dataclass(frozen=True)
class Identity:
    """Human-readable peer label, 1..64 octets of UTF-8."""

    label: str

    def __post_init__(self):
        try:
            encoded = self.label.encode("utf-8")
        except UnicodeEncodeError as exc:
            raise ValueError(f"identity is not encodable UTF-8: {exc}") from exc
        if not 1 <= len(encoded) <= MAX_IDENTITY_OCTETS:
            raise ValueError(f"identity must be 1..{MAX_IDENTITY_OCTETS} octets, got {len(encoded)}")

    def encoded(self) -> bytes:
        return self.label.encode("utf-8")


def _check_bits(data: bytes, k: int, what: str):
    if not 1 <= k <= MAX_K:
        raise ValueError(f"{what}: k must be in [1, {MAX_K}], got {k}")
    if len(data) != (k + 7) // 8:
        raise ValueError(f"{what}: need {(k + 7) // 8} octets for k={k}, got {len(data)}")
    if int.from_bytes(data, "big") >> k:
        raise ValueError(f"{what}: padding bits above bit {k} must be zero")


@dataclass(frozen=True)
class AuthNonce:
    """k-bit random string, stored big-endian in ceil(k/8) octets."""

    data: bytes
    k: int

    def __post_init__(self):
        _check_bits(self.data, self.k, "auth nonce")

    @classmethod
    def from_int(cls, value: int, k: int) -> "AuthNonce":
        return cls(value.to_bytes((k + 7) // 8, "big"), k)

    def to_int(self) -> int:
        return int.from_bytes(self.data, "big")


@dataclass(frozen=True)
class Sas:
    """Authentication string S = N_A xor N_B."""

    data: bytes
    k: int

    def __post_init__(self):
        _check_bits(self.data, self.k, "sas")

    def to_int(self) -> int:
        return int.from_bytes(self.data, "big")


def gen_auth_nonce(k: int, rng: random.Random | None = None) -> AuthNonce:
    if not 1 <= k <= MAX_K:
        raise ValueError(f"k must be in [1, {MAX_K}], got {k}")
    rng = rng or secrets.SystemRandom()
    try:
        value = rng.getrandbits(k)
    except Exception as exc:
        raise RngFailure(str(exc)) from exc
    return AuthNonce.from_int(value, k)


def compute_sas(local: AuthNonce, remote: AuthNonce) -> Sas:
    if local.k != remote.k:
        raise LengthMismatch(f"nonce bit lengths differ: {local.k} vs {remote.k}")
    data = bytes(a ^ b for a, b in zip(local.data, remote.data))
    return Sas(data, local.k)


def format_sas(sas: Sas) -> str:
    """Uppercase hex, ceil(k/4) digits, most-significant nibble first."""
    digits = (sas.k + 3) // 4
    return format(sas.to_int(), f"0{digits}X")


def key_fingerprint(key: SessionKey) -> str:
    """First 8 hex digits of SHA-256 over the key octets, for display."""
    return hashlib.sha256(key.octets).hexdigest()[:8]


# --- payload and wire encoding -------------------------------------------

@dataclass(frozen=True)
class PairingPayload:
    """The cleartext message m = identity || public share || nonce."""

    identity: Identity
    public_share: PublicShare
    auth_nonce: AuthNonce


def _field(data: bytes) -> bytes:
    if len(data) > 0xFFFF:
        raise MalformedMessage(f"field of {len(data)} octets exceeds 65535")
    return len(data).to_bytes(2, "big") + data


def _read_field(body: bytes, off: int) -> tuple[bytes, int]:
    if off + 2 > len(body):
        raise MalformedMessage("truncated field length")
    n = int.from_bytes(body[off:off + 2], "big")
    off += 2
    if off + n > len(body):
        raise MalformedMessage("field data runs past end of body")
    return body[off:off + n], off + n


def encode_payload(payload: PairingPayload) -> bytes:
    """Length-prefixed field encoding; injective, so commitment binding
    covers the exact identity/share/nonce boundaries."""
    return (
        _field(payload.identity.encoded())
        + _field(int_to_octets(payload.public_share.value))
        + _field(payload.auth_nonce.data)
    )


def decode_payload(data: bytes, k: int) -> PairingPayload:
    """Parse payload fields, validating against the session bit length k."""
    ident_raw, off = _read_field(data, 0)
    share_raw, off = _read_field(data, off)
    nonce_raw, off = _read_field(data, off)
    if off != len(data):
        raise MalformedMessage(f"{len(data) - off} trailing octets after payload fields")
    try:
        identity = Identity(ident_raw.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise MalformedMessage(f"bad identity field: {exc}") from exc
    if not share_raw or (len(share_raw) > 1 and share_raw[0] == 0):
        raise MalformedMessage("public share is not a minimal big-endian integer")
    share = PublicShare(int.from_bytes(share_raw, "big"))
    try:
        nonce = AuthNonce(nonce_raw, k)
    except ValueError as exc:
        raise MalformedMessage(f"bad nonce field: {exc}") from exc
    return PairingPayload(identity, share, nonce)


@dataclass(frozen=True)
class Msg1:
    c: Commitment


@dataclass(frozen=True)
class Msg2:
    param_set_id: int
    k: int
    payload: PairingPayload


@dataclass(frozen=True)
class Msg3:
    d: Decommitment


PairingMessage = Msg1 | Msg2 | Msg3


def encode_message(msg: PairingMessage) -> bytes:
    if isinstance(msg, Msg1):
        tag, body = TAG_COMMIT, msg.c.digest
    elif isinstance(msg, Msg2):
        tag = TAG_PAYLOAD
        body = (
            msg.param_set_id.to_bytes(4, "big")
            + msg.k.to_bytes(2, "big")
            + encode_payload(msg.payload)
        )
    elif isinstance(msg, Msg3):
        tag, body = TAG_DECOMMIT, msg.d.nonce + msg.d.message
    else:
        raise TypeError(f"not a pairing message: {msg!r}")
    if len(body) > MAX_BODY:
        raise MalformedMessage(f"body of {len(body)} octets exceeds {MAX_BODY}")
    return bytes([tag]) + len(body).to_bytes(4, "big") + body


def decode_message(frame: bytes) -> PairingMessage:
    """Decode one framed message.

    Msg3 payload octets are deliberately left unparsed here: the responder
    must check them against the commitment first, so that any tampering
    surfaces as OpenFailed rather than a parse error.
    """
    if len(frame) < HEADER_LEN:
        raise MalformedMessage(f"frame of {len(frame)} octets is shorter than the header")
    tag = frame[0]
    body_len = int.from_bytes(frame[1:5], "big")
    if body_len > MAX_BODY:
        raise MalformedMessage(f"declared body length {body_len} exceeds {MAX_BODY}")
    body = frame[HEADER_LEN:]
    if len(body) != body_len:
        raise MalformedMessage(f"body length {len(body)} does not match header {body_len}")
    if tag == TAG_COMMIT:
        if body_len != DIGEST_LEN:
            raise MalformedMessage(f"commit body must be {DIGEST_LEN} octets, got {body_len}")
        return Msg1(Commitment(body))
    if tag == TAG_PAYLOAD:
        if body_len < 6:
            raise MalformedMessage("payload body shorter than its fixed prefix")
        param_set_id = int.from_bytes(body[:4], "big")
        k = int.from_bytes(body[4:6], "big")
        if not 1 <= k <= MAX_K:
            raise MalformedMessage(f"k = {k} outside [1, {MAX_K}]")
        return Msg2(param_set_id, k, decode_payload(body[6:], k))
    if tag == TAG_DECOMMIT:
        if body_len < NONCE_LEN:
            raise MalformedMessage(f"decommit body must hold a {NONCE_LEN}-octet nonce")
        return Msg3(Decommitment(body[:NONCE_LEN], body[NONCE_LEN:]))
    raise MalformedMessage(f"unknown message tag 0x{tag:02x}")


# --- per-session state machine --------------------------------------------

class Role(Enum):
    INITIATOR = "initiator"
    RESPONDER = "responder"


class Phase(IntEnum):
    CREATED = 0
    COMMIT_EXCHANGED = 1
    PAYLOAD_EXCHANGED = 2
    DECOMMITTED = 3
    SAS_READY = 4
    CONFIRMED = 5
    ABORTED = 6


@dataclass
class ProtocolState:
    """One pairing session.  Mutated by the operations below; phases move
    strictly forward and every transition is appended to phase_log."""

    role: Role
    params: DhParams
    identity: Identity
    k: int
    private: PrivateShare
    own_nonce: AuthNonce
    own_payload: PairingPayload
    phase: Phase = Phase.CREATED
    commitment: Commitment | None = None      # own (initiator) or received (responder)
    decommitment: Decommitment | None = None  # initiator only
    remote_payload: PairingPayload | None = None
    sas: Sas | None = None
    session_key: SessionKey | None = None
    phase_log: list[Phase] = field(default_factory=lambda: [Phase.CREATED])

    def _advance(self, phase: Phase):
        if self.phase in (Phase.CONFIRMED, Phase.ABORTED) or phase <= self.phase:
            raise WrongPhase(f"cannot move {self.phase.name} -> {phase.name}")
        self.phase = phase
        self.phase_log.append(phase)

    def _abort(self):
        if self.phase != Phase.ABORTED:
            self.phase = Phase.ABORTED
            self.phase_log.append(Phase.ABORTED)

    @property
    def remote_identity(self) -> Identity | None:
        return self.remote_payload.identity if self.remote_payload else None


def _identity(value: Identity | str) -> Identity:
    return value if isinstance(value, Identity) else Identity(value)


def _new_state(
    role: Role,
    params: DhParams,
    identity: Identity | str,
    k: int,
    rng: random.Random | None,
    nonce: AuthNonce | None,
) -> ProtocolState:
    identity = _identity(identity)
    if not 1 <= k <= MAX_K:
        raise ValueError(f"k must be in [1, {MAX_K}], got {k}")
    rng = rng or secrets.SystemRandom()
    private = gen_private_share(params, rng)
    own_nonce = nonce if nonce is not None else gen_auth_nonce(k, rng)
    if own_nonce.k != k:
        raise ValueError(f"forced nonce has k={own_nonce.k}, session k={k}")
    payload = PairingPayload(identity, pub_share(params, private), own_nonce)
    return ProtocolState(role, params, identity, k, private, own_nonce, payload)


def init_initiator(
    params: DhParams,
    identity: Identity | str,
    k: int = DEFAULT_K,
    rng: random.Random | None = None,
    *,
    nonce: AuthNonce | None = None,
) -> tuple[ProtocolState, Msg1]:
    """Start a session as initiator.  Returns the state and the commit
    message; the payload itself stays hidden until Msg3.

    nonce overrides the random draw; it exists for the attack simulator's
    exhaustive enumeration and for tests.
    """
    rng = rng or secrets.SystemRandom()
    state = _new_state(Role.INITIATOR, params, identity, k, rng, nonce)
    c, d = commit(encode_payload(state.own_payload), rng)
    state.commitment, state.decommitment = c, d
    state._advance(Phase.COMMIT_EXCHANGED)
    return state, Msg1(c)


def responder_on_commit(
    params: DhParams,
    identity: Identity | str,
    k: int,
    rng: random.Random | None,
    msg1: PairingMessage,
    *,
    nonce: AuthNonce | None = None,
) -> tuple[ProtocolState, Msg2]:
    """Accept the initiator's commitment and reply with our payload."""
    if not isinstance(msg1, Msg1):
        raise MalformedMessage(f"expected a commit message, got {type(msg1).__name__}")
    state = _new_state(Role.RESPONDER, params, identity, k, rng, nonce)
    state.commitment = msg1.c
    state._advance(Phase.COMMIT_EXCHANGED)
    state._advance(Phase.PAYLOAD_EXCHANGED)
    return state, Msg2(params.set_id(), k, state.own_payload)


def initiator_on_payload(state: ProtocolState, msg2: PairingMessage) -> tuple[Msg3, Sas]:
    """Take the responder's payload, check it, and release the decommitment.

    The subgroup check runs before Msg3 is produced: a bad share aborts the
    session with the initiator's payload still hidden.
    """
    if state.role is not Role.INITIATOR or state.phase is not Phase.COMMIT_EXCHANGED:
        raise WrongPhase(f"initiator_on_payload in phase {state.phase.name}")
    try:
        if not isinstance(msg2, Msg2):
            raise MalformedMessage(f"expected a payload message, got {type(msg2).__name__}")
        if msg2.param_set_id != state.params.set_id():
            raise MalformedMessage(
                f"parameter set mismatch: peer 0x{msg2.param_set_id:08x}, ours 0x{state.params.set_id():08x}"
            )
        if msg2.k != state.k:
            raise MalformedMessage(f"k mismatch: peer {msg2.k}, ours {state.k}")
        if not in_subgroup(state.params, msg2.payload.public_share.value):
            raise SubgroupCheckFailed(
                f"responder share {msg2.payload.public_share.value} rejected"
            )
    except Exception:
        state._abort()
        raise
    state.remote_payload = msg2.payload
    state.sas = compute_sas(state.own_nonce, msg2.payload.auth_nonce)
    state._advance(Phase.PAYLOAD_EXCHANGED)
    state._advance(Phase.DECOMMITTED)
    state._advance(Phase.SAS_READY)
    return Msg3(state.decommitment), state.sas


def responder_on_decommit(state: ProtocolState, msg3: PairingMessage) -> Sas:
    """Open the stored commitment and recover the initiator's payload.

    Opening happens before the payload octets are parsed, so any tampering
    with commit material surfaces as OpenFailed.
    """
    if state.role is not Role.RESPONDER or state.phase is not Phase.PAYLOAD_EXCHANGED:
        raise WrongPhase(f"responder_on_decommit in phase {state.phase.name}")
    try:
        if not isinstance(msg3, Msg3):
            raise MalformedMessage(f"expected a decommit message, got {type(msg3).__name__}")
        message = open_commitment(state.commitment, msg3.d)
        payload = decode_payload(message, state.k)
        if not in_subgroup(state.params, payload.public_share.value):
            raise SubgroupCheckFailed(f"initiator share {payload.public_share.value} rejected")
    except Exception:
        state._abort()
        raise
    state.remote_payload = payload
    state.sas = compute_sas(payload.auth_nonce, state.own_nonce)
    state._advance(Phase.DECOMMITTED)
    state._advance(Phase.SAS_READY)
    return state.sas


def confirm(state: ProtocolState, user_accepts: bool) -> SessionKey | None:
    """Derive the session key iff the operator accepted the SAS comparison.

    On rejection the session aborts and no key material is ever computed.
    """
    if state.phase is not Phase.SAS_READY:
        raise WrongPhase(f"confirm in phase {state.phase.name}")
    if not user_accepts:
        state._abort()
        return None
    key = derive_key(state.params, state.remote_payload.public_share, state.private)
    state.session_key = key
    state._advance(Phase.CONFIRMED)
    return key
