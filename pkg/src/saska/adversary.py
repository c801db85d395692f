"""Man-in-the-middle attack strategies and attack-rate measurement.

The attacker owns the channel between two honest peers (Dolev-Yao: it can
overhear, intercept, modify, drop, and inject frames) but cannot break the
commitment hash.  Every built-in strategy substitutes its own payload
m_E = ID || g^e || N_E into the sessions it manipulates, so it ends up
sharing a key with a victim whenever the victims accept.

What the strategies cannot dodge is the commit/reveal ordering: one honest
k-bit nonce is still hidden at the moment the attacker's own nonce becomes
immutable.  Each strategy therefore reduces to guessing that nonce, and the
success rate of the optimal guess is exactly 2^-k - measurable here by
exhaustive enumeration (small k) and Monte Carlo estimation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from statistics import NormalDist

from .commitment import commit
from .errors import KTooLarge, PairingError
from .group import DhParams, PublicShare, gen_private_share
from .protocol import (
    AuthNonce,
    Identity,
    Msg1,
    Msg2,
    Msg3,
    PairingPayload,
    Phase,
    ProtocolState,
    Sas,
    confirm,
    decode_message,
    decode_payload,
    encode_message,
    encode_payload,
    init_initiator,
    initiator_on_payload,
    responder_on_commit,
    responder_on_decommit,
)
from .transport import (
    Direction,
    Drop,
    Inject,
    Replace,
    Transcript,
    make_interposed_pair,
)

EXHAUSTIVE_MAX_K = 16

INITIATOR_ID = "alice"
RESPONDER_ID = "bob"


class StrategyKind(Enum):
    HONEST = "honest"
    IMPERSONATE_INITIATOR = "impersonate-initiator"
    IMPERSONATE_RESPONDER = "impersonate-responder"
    FULL_MITM = "full-mitm"


class GuessRule(Enum):
    FIXED = "fixed"
    UNIFORM = "uniform"
    ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class AttackStrategy:
    """A strategy kind plus the rule for choosing the blind nonce guess.

    * fixed: always guess `fixed_guess` (masked to k bits).
    * uniform: draw the guess uniformly per trial.
    * adaptive: guess the XOR of every nonce observed in plaintext so far.
      The guessed nonce is still hidden at decision time, so adaptivity
      cannot raise the hit rate; the simulator demonstrates that.
    """

    kind: StrategyKind
    guess_rule: GuessRule = GuessRule.UNIFORM
    fixed_guess: int = 0

    @property
    def guessed_side(self) -> str:
        """Which honest nonce the attacker is forced to guess."""
        if self.kind is StrategyKind.IMPERSONATE_RESPONDER:
            return "responder"
        return "initiator"


@dataclass
class AttackOutcome:
    """Result of one protocol run under an interposed adversary."""

    success: bool
    sas_a: Sas | None
    sas_b: Sas | None
    sas_match: bool
    keys_equal: bool
    attacker_key_with_a: bool
    attacker_key_with_b: bool
    transcript: Transcript
    aborts: tuple = ()  # "<side>: <error>" for every rejected frame


@dataclass(frozen=True)
class RateEstimate:
    trials: int
    successes: int
    rate: float
    ci_low: float
    ci_high: float


def wilson_interval(successes: int, trials: int, confidence: float = 0.99) -> tuple[float, float]:
    """Two-sided Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    z = NormalDist().inv_cdf(1 - (1 - confidence) / 2)
    phat = successes / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = (z / denom) * (phat * (1 - phat) / trials + z * z / (4 * trials * trials)) ** 0.5
    # clamp against float noise so the interval always brackets the rate
    return max(0.0, min(center - half, phat)), min(1.0, max(center + half, phat))


# --- attacker callbacks -----------------------------------------------------

class _Attacker:
    """Shared machinery: crafts frames, tracks what it has seen in
    plaintext, resolves its nonce guess under the configured rule."""

    def __init__(self, strategy: AttackStrategy, params: DhParams, k: int, rng: random.Random):
        self.strategy = strategy
        self.params = params
        self.k = k
        self.rng = rng
        self.exponent = gen_private_share(params, rng).exponent
        self.share = pow(params.g, self.exponent, params.p)
        self.seen_nonces: list[int] = []   # plaintext nonces, in observation order
        self.seen_share_a: int | None = None
        self.seen_share_b: int | None = None
        self.guess: int | None = None

    def resolve_guess(self) -> int:
        """Fix the guess of the still-hidden honest nonce.  Called exactly
        once, at the moment the attacker's own nonce becomes immutable."""
        rule = self.strategy.guess_rule
        if rule is GuessRule.FIXED:
            guess = self.strategy.fixed_guess
        elif rule is GuessRule.UNIFORM:
            guess = self.rng.getrandbits(self.k)
        else:  # ADAPTIVE: fold everything seen in the clear so far
            guess = 0
            for n in self.seen_nonces:
                guess ^= n
        self.guess = guess & ((1 << self.k) - 1)
        return self.guess

    def payload(self, label: str, nonce_value: int) -> PairingPayload:
        return PairingPayload(
            Identity(label),
            PublicShare(self.share),
            AuthNonce.from_int(nonce_value, self.k),
        )

    def note_payload(self, payload: PairingPayload, side: str):
        self.seen_nonces.append(payload.auth_nonce.to_int())
        if side == "a":
            self.seen_share_a = payload.public_share.value
        else:
            self.seen_share_b = payload.public_share.value

    def key_with_a(self) -> int | None:
        if self.seen_share_a is None:
            return None
        return pow(self.seen_share_a, self.exponent, self.params.p)

    def key_with_b(self) -> int | None:
        if self.seen_share_b is None:
            return None
        return pow(self.seen_share_b, self.exponent, self.params.p)


class ImpersonateInitiatorAttacker(_Attacker):
    """Run the protocol with B pretending to be A (commit-first attack).

    The attacker's committed nonce must equal N_A, which is revealed only
    after the commitment is out.  Toward A it passes N_B through unchanged
    while substituting its own share, so S_A = N_A ^ N_B and
    S_B = guess ^ N_B.
    """

    def __call__(self, frame, direction, history):
        msg = decode_message(frame)
        if isinstance(msg, Msg1) and direction is Direction.A_TO_B:
            # replace A's commitment with our own; the guess is frozen here
            n_e = self.resolve_guess()
            c, d = commit(encode_payload(self.payload(INITIATOR_ID, n_e)), self.rng)
            self.decommit = d
            return Replace(encode_message(Msg1(c)))
        if isinstance(msg, Msg2) and direction is Direction.B_TO_A:
            self.note_payload(msg.payload, "b")
            forged = self.payload(RESPONDER_ID, msg.payload.auth_nonce.to_int())
            return Replace(encode_message(Msg2(msg.param_set_id, msg.k, forged)))
        if isinstance(msg, Msg3) and direction is Direction.A_TO_B:
            self.note_payload(decode_payload(msg.d.message, self.k), "a")
            return Replace(encode_message(Msg3(self.decommit)))
        return Drop()


class ImpersonateResponderAttacker(_Attacker):
    """Reply to initiator A with the attacker's own payload, then carry the
    stolen session to B.

    The reply to A is sent while N_A is still hidden inside A's commitment,
    and the later commitment toward B must be emitted before B reveals N_B;
    the attacker aligns the two SAS values up to one blind guess of N_B.
    """

    def __call__(self, frame, direction, history):
        msg = decode_message(frame)
        if isinstance(msg, Msg1) and direction is Direction.A_TO_B:
            # absorb A's commitment and answer it ourselves
            self.own_reply_nonce = self.rng.getrandbits(self.k)
            forged = self.payload(RESPONDER_ID, self.own_reply_nonce)
            reply = Msg2(self.params.set_id(), self.k, forged)
            return [Drop(), Inject(encode_message(reply), Direction.B_TO_A)]
        if isinstance(msg, Msg3) and direction is Direction.A_TO_B:
            # A decommitted to us; now impersonate A toward B
            payload_a = decode_payload(msg.d.message, self.k)
            self.note_payload(payload_a, "a")
            n_a = payload_a.auth_nonce.to_int()
            guess_n_b = self.resolve_guess()
            n_e2 = n_a ^ self.own_reply_nonce ^ guess_n_b
            c, d = commit(encode_payload(self.payload(INITIATOR_ID, n_e2)), self.rng)
            self.decommit = d
            return [Drop(), Inject(encode_message(Msg1(c)), Direction.A_TO_B)]
        if isinstance(msg, Msg2) and direction is Direction.B_TO_A:
            # B's real payload; N_B arrives after our commitment is out
            self.note_payload(msg.payload, "b")
            return [Drop(), Inject(encode_message(Msg3(self.decommit)), Direction.A_TO_B)]
        return Drop()


class FullMitmAttacker(_Attacker):
    """Bridge two concurrent sessions, substituting the attacker's payload
    in both.  With the adaptive rule the reply to A folds in the observed
    N_B, which still leaves N_A to be guessed blind."""

    def __call__(self, frame, direction, history):
        msg = decode_message(frame)
        if isinstance(msg, Msg1) and direction is Direction.A_TO_B:
            self.bridge_nonce = self.rng.getrandbits(self.k)
            c, d = commit(encode_payload(self.payload(INITIATOR_ID, self.bridge_nonce)), self.rng)
            self.decommit = d
            return Replace(encode_message(Msg1(c)))
        if isinstance(msg, Msg2) and direction is Direction.B_TO_A:
            self.note_payload(msg.payload, "b")
            guess_n_a = self.resolve_guess()
            n_e_a = msg.payload.auth_nonce.to_int() ^ self.bridge_nonce ^ guess_n_a
            forged = self.payload(RESPONDER_ID, n_e_a)
            return Replace(encode_message(Msg2(msg.param_set_id, msg.k, forged)))
        if isinstance(msg, Msg3) and direction is Direction.A_TO_B:
            self.note_payload(decode_payload(msg.d.message, self.k), "a")
            return Replace(encode_message(Msg3(self.decommit)))
        return Drop()


_ATTACKERS = {
    StrategyKind.IMPERSONATE_INITIATOR: ImpersonateInitiatorAttacker,
    StrategyKind.IMPERSONATE_RESPONDER: ImpersonateResponderAttacker,
    StrategyKind.FULL_MITM: FullMitmAttacker,
}


# --- trial driver -----------------------------------------------------------

_MAX_STEPS = 16


def _child_rngs(seed) -> tuple[random.Random, random.Random, random.Random]:
    master = random.Random(seed)
    return tuple(random.Random(master.getrandbits(64)) for _ in range(3))


def _run_trial(
    params: DhParams,
    k: int,
    rng_a: random.Random,
    rng_b: random.Random,
    attacker: _Attacker | None,
    nonce_a: AuthNonce | None = None,
    nonce_b: AuthNonce | None = None,
) -> AttackOutcome:
    chan_a, chan_b, transcript = make_interposed_pair(
        attacker, default_timeout=0.0
    )

    state_a, msg1 = init_initiator(params, INITIATOR_ID, k, rng_a, nonce=nonce_a)
    chan_a.send_frame(encode_message(msg1))
    state_b: ProtocolState | None = None
    b_rejected = False
    aborts: list[str] = []

    for _ in range(_MAX_STEPS):
        progressed = False

        # responder side
        try:
            frame = chan_b.recv_frame(0)
        except PairingError:
            frame = None
        if frame is not None:
            progressed = True
            try:
                msg = decode_message(frame)
                if state_b is None and not b_rejected:
                    state_b, msg2 = responder_on_commit(
                        params, RESPONDER_ID, k, rng_b, msg, nonce=nonce_b
                    )
                    chan_b.send_frame(encode_message(msg2))
                elif state_b is not None and state_b.phase is Phase.PAYLOAD_EXCHANGED:
                    responder_on_decommit(state_b, msg)
                # frames arriving in any other phase are stray; ignore
            except PairingError as exc:
                b_rejected = True
                aborts.append(f"responder: {type(exc).__name__}: {exc}")

        # initiator side
        try:
            frame = chan_a.recv_frame(0)
        except PairingError:
            frame = None
        if frame is not None:
            progressed = True
            try:
                msg = decode_message(frame)
                if state_a.phase is Phase.COMMIT_EXCHANGED:
                    msg3, _ = initiator_on_payload(state_a, msg)
                    chan_a.send_frame(encode_message(msg3))
            except PairingError as exc:
                aborts.append(f"initiator: {type(exc).__name__}: {exc}")

        if not progressed:
            break

    sas_a = state_a.sas
    sas_b = state_b.sas if state_b is not None else None
    sas_match = sas_a is not None and sas_b is not None and sas_a == sas_b

    # careful-user oracle: each side accepts iff the two displayed strings match
    key_a = key_b = None
    if sas_match:
        key_a = confirm(state_a, True)
        key_b = confirm(state_b, True)
    else:
        if state_a.phase is Phase.SAS_READY:
            confirm(state_a, False)
        if state_b is not None and state_b.phase is Phase.SAS_READY:
            confirm(state_b, False)

    keys_equal = key_a is not None and key_b is not None and key_a.octets == key_b.octets
    atk_a = atk_b = False
    if attacker is not None:
        ek_a, ek_b = attacker.key_with_a(), attacker.key_with_b()
        atk_a = key_a is not None and ek_a == key_a.value
        atk_b = key_b is not None and ek_b == key_b.value
        success = sas_match and (atk_a or atk_b)
    else:
        success = sas_match and keys_equal

    return AttackOutcome(
        success=success,
        sas_a=sas_a,
        sas_b=sas_b,
        sas_match=sas_match,
        keys_equal=keys_equal,
        attacker_key_with_a=atk_a,
        attacker_key_with_b=atk_b,
        transcript=transcript,
        aborts=tuple(aborts),
    )


def make_attacker(strategy: AttackStrategy, params: DhParams, k: int, rng: random.Random):
    if strategy.kind is StrategyKind.HONEST:
        return None
    return _ATTACKERS[strategy.kind](strategy, params, k, rng)


def run_honest_session(params: DhParams, k: int = 20, seed=None) -> AttackOutcome:
    """Identity adversary: the completeness check.  Succeeds iff the two
    SAS values agree and both sides derive the same key."""
    rng_a, rng_b, _ = _child_rngs(seed)
    return _run_trial(params, k, rng_a, rng_b, None)


def run_mitm_trial(strategy: AttackStrategy, params: DhParams, k: int, seed=None) -> AttackOutcome:
    """One full protocol execution with the strategy's attacker interposed."""
    rng_a, rng_b, rng_e = _child_rngs(seed)
    if strategy.kind is StrategyKind.HONEST:
        return _run_trial(params, k, rng_a, rng_b, None)
    attacker = make_attacker(strategy, params, k, rng_e)
    return _run_trial(params, k, rng_a, rng_b, attacker)


def exhaustive_attack_success(
    strategy: AttackStrategy, params: DhParams, k: int, seed=0
) -> Fraction:
    """Exact attack success fraction by enumerating all 2^k values of the
    honest nonce the attacker must guess, holding everything else fixed.

    The attacker guess is fixed across the enumeration: a strategy with the
    uniform rule has its guess drawn once from the seed.
    """
    if k > EXHAUSTIVE_MAX_K:
        raise KTooLarge(f"k = {k} exceeds the enumeration bound {EXHAUSTIVE_MAX_K}")
    seed = 0 if seed is None else seed
    if strategy.kind is StrategyKind.HONEST:
        ok = sum(
            run_honest_session(params, k, (seed << EXHAUSTIVE_MAX_K) | v).success
            for v in range(2 ** k)
        )
        return Fraction(ok, 2 ** k)

    frozen = strategy
    if strategy.guess_rule is GuessRule.UNIFORM:
        _, _, rng_e = _child_rngs(seed)
        frozen = AttackStrategy(strategy.kind, GuessRule.FIXED, rng_e.getrandbits(k))

    target = frozen.guessed_side
    successes = 0
    for value in range(2 ** k):
        nonce = AuthNonce.from_int(value, k)
        rng_a, rng_b, rng_e = _child_rngs(seed)
        attacker = make_attacker(frozen, params, k, rng_e)
        outcome = _run_trial(
            params, k, rng_a, rng_b, attacker,
            nonce_a=nonce if target == "initiator" else None,
            nonce_b=nonce if target == "responder" else None,
        )
        successes += outcome.success
    return Fraction(successes, 2 ** k)


def estimate_attack_success(
    strategy: AttackStrategy, params: DhParams, k: int, trials: int, seed=None
) -> RateEstimate:
    """Monte Carlo attack rate over independent honest randomness, with a
    99% two-sided binomial (Wilson) confidence interval."""
    if strategy.kind is not StrategyKind.HONEST and trials < 1000:
        raise ValueError(f"need at least 1000 trials for a meaningful rate, got {trials}")
    if trials < 1:
        raise ValueError("trials must be positive")
    master = random.Random(seed)
    successes = 0
    for _ in range(trials):
        successes += run_mitm_trial(strategy, params, k, master.getrandbits(64)).success
    rate = successes / trials
    ci_low, ci_high = wilson_interval(successes, trials)
    return RateEstimate(trials, successes, rate, ci_low, ci_high)


# --- reporting --------------------------------------------------------------

@dataclass(frozen=True)
class SimReport:
    mode: str          # "exhaustive" | "montecarlo" | "honest"
    strategy: str
    k: int
    trials: int
    successes: int
    rate: float
    ci_low: float
    ci_high: float
    bound: float
    passed: bool

    def kv_line(self) -> str:
        return (
            f"strategy={self.strategy} mode={self.mode} k={self.k} "
            f"trials={self.trials} successes={self.successes} "
            f"rate={self.rate:.8g} ci_low={self.ci_low:.8g} ci_high={self.ci_high:.8g} "
            f"bound={self.bound:.8g} result={'pass' if self.passed else 'fail'}"
        )


def report_from_exhaustive(strategy: AttackStrategy, k: int, fraction: Fraction) -> SimReport:
    bound = 2.0 ** -k
    rate = float(fraction)
    if strategy.kind is StrategyKind.HONEST:
        passed = fraction == 1
    else:
        passed = fraction <= Fraction(1, 2 ** k)
    return SimReport(
        "exhaustive", strategy.kind.value, k, 2 ** k,
        int(fraction * 2 ** k), rate, rate, rate, bound, passed,
    )


def report_from_estimate(strategy: AttackStrategy, k: int, est: RateEstimate) -> SimReport:
    bound = 2.0 ** -k
    if strategy.kind is StrategyKind.HONEST:
        mode, passed = "honest", est.rate == 1.0
    else:
        # the bound holds unless the whole 99% interval sits above it
        mode, passed = "montecarlo", est.ci_low <= bound
    return SimReport(
        mode, strategy.kind.value, k, est.trials, est.successes,
        est.rate, est.ci_low, est.ci_high, bound, passed,
    )


def report_table(reports: list[SimReport]) -> list[str]:
    header = f"{'strategy':<24} {'mode':<11} {'k':>3} {'trials':>8} {'successes':>9} {'rate':>12} {'bound':>12} {'result':>6}"
    lines = [header, "-" * len(header)]
    for r in reports:
        lines.append(
            f"{r.strategy:<24} {r.mode:<11} {r.k:>3} {r.trials:>8} {r.successes:>9} "
            f"{r.rate:>12.6g} {r.bound:>12.6g} {'pass' if r.passed else 'fail':>6}"
        )
    return lines
