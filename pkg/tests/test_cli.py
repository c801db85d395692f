import io
import random
import socket
import threading

import pytest

from saska import cli
from saska.cli import EXIT_REJECTED, EXIT_TAMPER, EXIT_TIMEOUT, EXIT_TRANSPORT, main
from saska.group import DhParams, PARAM_SETS
from saska.protocol import (
    decode_message,
    encode_message,
    format_sas,
    init_initiator,
    initiator_on_payload,
    responder_on_commit,
    responder_on_decommit,
)
from saska.transport import StreamListener, connect_stream


def find_free_port() -> int:
    with socket.socket() as s:
        s.bind(("", 0))
        return s.getsockname()[1]


class CliThread(threading.Thread):
    def __init__(self, argv):
        super().__init__()
        self.argv = argv
        self.exit_code = None

    def run(self):
        self.exit_code = main(self.argv)


class TestResolveParams:
    def test_named_set(self):
        assert cli._resolve_params("test") == PARAM_SETS["test"]

    def test_default(self, monkeypatch):
        monkeypatch.delenv(cli.PARAMS_ENV_VAR, raising=False)
        assert cli._resolve_params(None) == PARAM_SETS["p40"]

    def test_file(self, tmp_path):
        path = tmp_path / "g.params"
        path.write_text("23\n11\n2\n")
        assert cli._resolve_params(str(path)) == DhParams(23, 11, 2)

    def test_env_var(self, tmp_path, monkeypatch):
        path = tmp_path / "g.params"
        path.write_text("23\n11\n2\n")
        monkeypatch.setenv(cli.PARAMS_ENV_VAR, str(path))
        assert cli._resolve_params(None) == DhParams(23, 11, 2)

    def test_garbage(self):
        with pytest.raises(ValueError):
            cli._resolve_params("no-such-set-or-file")


class TestSim:
    def test_exhaustive_impersonate_responder_k3(self, capsys):
        code = main(["sim", "--strategy", "impersonate-responder", "--k", "3",
                     "--exhaustive", "--params", "test", "--seed", "1"])
        out = capsys.readouterr().out
        assert code == 0
        assert "rate=0.125" in out
        assert "result=pass" in out
        assert "mode=exhaustive" in out

    def test_honest_completeness(self, capsys):
        code = main(["sim", "--strategy", "honest", "--trials", "100",
                     "--params", "test", "--seed", "2"])
        out = capsys.readouterr().out
        assert code == 0
        assert "successes=100" in out
        assert "rate=1" in out
        assert "mode=honest" in out

    def test_seeded_runs_are_deterministic(self, capsys):
        args = ["sim", "--strategy", "full-mitm", "--k", "8", "--trials", "2000",
                "--params", "test", "--seed", "42"]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert main(args) == 0
        second = capsys.readouterr().out
        assert first == second

    def test_montecarlo_report_fields(self, capsys):
        code = main(["sim", "--strategy", "impersonate-initiator", "--k", "8",
                     "--trials", "2000", "--params", "test", "--seed", "3"])
        out = capsys.readouterr().out
        assert code == 0
        kv = [l for l in out.splitlines() if l.startswith("strategy=")][0]
        for field in ("strategy=", "k=", "trials=", "successes=", "rate=",
                      "ci_low=", "ci_high=", "bound=", "result="):
            assert field in kv

    def test_exhaustive_and_montecarlo_together(self, capsys):
        code = main(["sim", "--strategy", "impersonate-responder", "--k", "3",
                     "--exhaustive", "--trials", "1500", "--params", "test", "--seed", "4"])
        out = capsys.readouterr().out
        assert code == 0
        assert "mode=exhaustive" in out and "mode=montecarlo" in out

    def test_invalid_strategy_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["sim", "--strategy", "replay-everything"])
        assert excinfo.value.code == 2

    def test_exhaustive_k_too_large(self, capsys):
        code = main(["sim", "--strategy", "full-mitm", "--k", "20",
                     "--exhaustive", "--params", "test", "--seed", "1"])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_too_few_attack_trials(self, capsys):
        code = main(["sim", "--strategy", "full-mitm", "--k", "8",
                     "--trials", "10", "--params", "test", "--seed", "1"])
        assert code == 2


class TestPeerExitCodes:
    def test_connection_refused(self, capsys):
        port = find_free_port()
        code = main(["--connect", f"127.0.0.1:{port}", "--id", "bob", "--params", "test"])
        assert code == EXIT_TRANSPORT

    def test_silent_peer_times_out(self):
        listener = StreamListener(0)
        accepted = []

        def silent_server():
            accepted.append(listener.accept(5.0))

        t = threading.Thread(target=silent_server)
        t.start()
        code = main(["--connect", f"127.0.0.1:{listener.port}", "--id", "bob",
                     "--params", "test", "--timeout", "0.2"])
        t.join()
        listener.close()
        assert code == EXIT_TIMEOUT

    def test_garbage_reply_is_tamper_exit(self):
        listener = StreamListener(0)

        def bad_server():
            chan = listener.accept(5.0)
            chan.recv_frame(5.0)  # discard msg1
            chan.send_frame(bytes([0x07]) + (3).to_bytes(4, "big") + b"abc")

        t = threading.Thread(target=bad_server)
        t.start()
        code = main(["--connect", f"127.0.0.1:{listener.port}", "--id", "bob",
                     "--params", "test", "--timeout", "2"])
        t.join()
        listener.close()
        assert code == EXIT_TAMPER

    def test_tampered_decommit_aborts_responder(self, monkeypatch, capsys, test_params):
        monkeypatch.setattr("sys.stdin", io.StringIO("y\n"))
        port = find_free_port()
        peer = CliThread(["--listen", str(port), "--id", "alice",
                          "--params", "test", "--timeout", "5"])
        peer.start()
        chan = None
        for _ in range(100):
            try:
                chan = connect_stream("127.0.0.1", port, timeout=0.1)
                break
            except OSError:
                pass
        state, msg1 = init_initiator(test_params, "mallory", 20, random.Random(1))
        chan.send_frame(encode_message(msg1))
        msg2 = decode_message(chan.recv_frame(5.0))
        msg3, _ = initiator_on_payload(state, msg2)
        frame = bytearray(encode_message(msg3))
        frame[10] ^= 0x01  # flip one bit of the decommit nonce
        chan.send_frame(bytes(frame))
        peer.join()
        chan.close()
        assert peer.exit_code == EXIT_TAMPER

    def test_operator_rejection(self, monkeypatch, capsys, test_params):
        monkeypatch.setattr("sys.stdin", io.StringIO("n\n"))
        listener = StreamListener(0)
        box = {}

        def responder():
            chan = listener.accept(5.0)
            state_b, msg2 = responder_on_commit(
                test_params, "alice", 20, random.Random(2),
                decode_message(chan.recv_frame(5.0)))
            chan.send_frame(encode_message(msg2))
            box["sas"] = responder_on_decommit(state_b, decode_message(chan.recv_frame(5.0)))

        t = threading.Thread(target=responder)
        t.start()
        code = main(["--connect", f"127.0.0.1:{listener.port}", "--id", "bob",
                     "--params", "test", "--timeout", "5"])
        t.join()
        listener.close()
        out = capsys.readouterr().out
        assert code == EXIT_REJECTED
        assert "fingerprint" not in out
        assert f"alice : {format_sas(box['sas'])}" in out

    def test_full_pairing_connect_side(self, monkeypatch, capsys, test_params):
        monkeypatch.setattr("sys.stdin", io.StringIO("y\n"))
        listener = StreamListener(0)
        box = {}

        def responder():
            chan = listener.accept(5.0)
            state_b, msg2 = responder_on_commit(
                test_params, "alice", 20, random.Random(2),
                decode_message(chan.recv_frame(5.0)))
            chan.send_frame(encode_message(msg2))
            box["sas"] = responder_on_decommit(state_b, decode_message(chan.recv_frame(5.0)))

        t = threading.Thread(target=responder)
        t.start()
        code = main(["--connect", f"127.0.0.1:{listener.port}", "--id", "bob",
                     "--params", "test", "--timeout", "5"])
        t.join()
        listener.close()
        out = capsys.readouterr().out
        assert code == 0
        assert f"alice : {format_sas(box['sas'])}" in out
        assert "fingerprint: " in out

    def test_identity_flag_required(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["--connect", "127.0.0.1:1"])
        assert excinfo.value.code == 2
