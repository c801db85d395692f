"""Command-line peers and attack-simulation driver.

Peer mode pairs two processes over TCP:

    saska --listen 9000 --id alice
    saska --connect 127.0.0.1:9000 --id bob

Each side prints the remote identity next to the authentication string,
asks the operator to confirm the match, and on "y" prints the session key
fingerprint.  Sim mode measures attack success rates:

    saska sim --strategy impersonate-responder --k 3 --exhaustive
    saska sim --strategy impersonate-responder --k 8 --trials 100000 --seed 1
"""

from __future__ import annotations

import argparse
import os
import secrets
import sys

from . import adversary
from .adversary import AttackStrategy, GuessRule, StrategyKind
from .errors import (
    ChannelClosed,
    MalformedMessage,
    OpenFailed,
    PairingError,
    SubgroupCheckFailed,
    Timeout,
    WrongPhase,
)
from .group import DEFAULT_PARAM_SET, PARAM_SETS, DhParams, load_params_file
from .protocol import (
    DEFAULT_K,
    DEFAULT_TIMEOUT,
    confirm,
    decode_message,
    encode_message,
    format_sas,
    init_initiator,
    initiator_on_payload,
    key_fingerprint,
    responder_on_commit,
    responder_on_decommit,
)
from .transport import StreamListener, connect_stream

EXIT_OK = 0
EXIT_TRANSPORT = 2
EXIT_TAMPER = 3
EXIT_REJECTED = 4
EXIT_TIMEOUT = 5

PARAMS_ENV_VAR = "SASKA_PARAMS"

STRATEGY_NAMES = {s.value: s for s in StrategyKind}


def _resolve_params(spec: str | None) -> DhParams:
    """--params takes a built-in set name or a parameter file path; with no
    flag, the file named by $SASKA_PARAMS wins, then the default set."""
    if spec is None:
        env = os.environ.get(PARAMS_ENV_VAR)
        if env:
            return load_params_file(env)
        return PARAM_SETS[DEFAULT_PARAM_SET]
    if spec in PARAM_SETS:
        return PARAM_SETS[spec]
    if os.path.exists(spec):
        return load_params_file(spec)
    raise ValueError(f"--params {spec!r} is neither a known set {sorted(PARAM_SETS)} nor a file")


def _peer_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="saska",
        description="Pair with a peer over TCP using SAS-authenticated Diffie-Hellman.",
    )
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--listen", type=int, metavar="PORT",
                      help="wait for a peer (responder role); 0 picks a free port")
    mode.add_argument("--connect", metavar="HOST:PORT",
                      help="connect to a listening peer (initiator role)")
    p.add_argument("--id", required=True, metavar="LABEL", help="identity shown to the peer")
    p.add_argument("--k", type=int, default=DEFAULT_K, metavar="BITS",
                   help="authentication string length in bits (default %(default)s)")
    p.add_argument("--params", metavar="NAME|FILE", default=None,
                   help=f"parameter set name or file (default {DEFAULT_PARAM_SET}; env {PARAMS_ENV_VAR})")
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT, metavar="SECONDS",
                   help="per-message wait (default %(default)s)")
    return p


def _sim_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="saska sim",
        description="Measure man-in-the-middle attack success rates.",
    )
    p.add_argument("--strategy", required=True, choices=sorted(STRATEGY_NAMES))
    p.add_argument("--k", type=int, default=DEFAULT_K, metavar="BITS")
    p.add_argument("--trials", type=int, default=None, metavar="N",
                   help="Monte Carlo trial count (default 10000 unless --exhaustive)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed for reproducible runs")
    p.add_argument("--exhaustive", action="store_true",
                   help="enumerate all 2^k guessed-nonce values (k <= 16)")
    p.add_argument("--guess", choices=[g.value for g in GuessRule], default=None,
                   help="attacker guess rule (default: fixed for --exhaustive, uniform otherwise)")
    p.add_argument("--guess-value", type=int, default=0, metavar="N",
                   help="the guess used by the fixed rule")
    p.add_argument("--params", metavar="NAME|FILE", default=None)
    return p


def _ask_confirmation() -> bool:
    sys.stdout.write("confirm match [y/n]: ")
    sys.stdout.flush()
    line = sys.stdin.readline()
    return line.strip().lower() in ("y", "yes")


def run_peer(args) -> int:
    params = _resolve_params(args.params)
    listener = None
    channel = None
    try:
        if args.connect is not None:
            host, _, port = args.connect.rpartition(":")
            channel = connect_stream(host or "127.0.0.1", int(port), timeout=args.timeout)
            state, msg1 = init_initiator(params, args.id, args.k)
            channel.send_frame(encode_message(msg1))
            msg2 = decode_message(channel.recv_frame(args.timeout))
            msg3, sas = initiator_on_payload(state, msg2)
            channel.send_frame(encode_message(msg3))
        else:
            listener = StreamListener(args.listen)
            print(f"listening :{listener.port}", flush=True)
            channel = listener.accept(args.timeout)
            msg1 = decode_message(channel.recv_frame(args.timeout))
            state, msg2 = responder_on_commit(params, args.id, args.k, None, msg1)
            channel.send_frame(encode_message(msg2))
            msg3 = decode_message(channel.recv_frame(args.timeout))
            sas = responder_on_decommit(state, msg3)

        print(f"{state.remote_identity.label} : {format_sas(sas)}", flush=True)
        if not _ask_confirmation():
            confirm(state, False)
            print("rejected by operator; no key derived", file=sys.stderr)
            return EXIT_REJECTED
        key = confirm(state, True)
        print(f"fingerprint: {key_fingerprint(key)}", flush=True)
        return EXIT_OK
    except Timeout as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT
    except (OpenFailed, MalformedMessage, SubgroupCheckFailed, WrongPhase) as exc:
        print(f"protocol violation: {exc}", file=sys.stderr)
        return EXIT_TAMPER
    except (ChannelClosed, ConnectionRefusedError, OSError) as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    finally:
        if channel is not None:
            channel.close()
        if listener is not None:
            listener.close()


def run_sim(args) -> int:
    params = _resolve_params(args.params)
    kind = STRATEGY_NAMES[args.strategy]
    seed = args.seed if args.seed is not None else secrets.randbits(64)

    reports = []
    try:
        if args.exhaustive:
            rule = GuessRule(args.guess) if args.guess else GuessRule.FIXED
            strategy = AttackStrategy(kind, rule, args.guess_value)
            frac = adversary.exhaustive_attack_success(strategy, params, args.k, seed=seed)
            reports.append(adversary.report_from_exhaustive(strategy, args.k, frac))
        if args.trials is not None or not args.exhaustive:
            trials = args.trials if args.trials is not None else 10000
            rule = GuessRule(args.guess) if args.guess else GuessRule.UNIFORM
            strategy = AttackStrategy(kind, rule, args.guess_value)
            est = adversary.estimate_attack_success(strategy, params, args.k, trials, seed=seed)
            reports.append(adversary.report_from_estimate(strategy, args.k, est))
    except (PairingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    print(f"seed={seed}")
    for line in adversary.report_table(reports):
        print(line)
    for r in reports:
        print(r.kv_line())
    return EXIT_OK if all(r.passed for r in reports) else 1


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "sim":
        return run_sim(_sim_parser().parse_args(argv[1:]))
    return run_peer(_peer_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
