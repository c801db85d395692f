"""Exception hierarchy for the pairing protocol and its transports."""


class PairingError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(PairingError):
    """A proposed (p, q, g) triple does not define a prime-order subgroup."""


class NotPrime(ParameterError):
    def __init__(self, value: int, name: str = "value"):
        self.value = value
        super().__init__(f"{name} = {value} failed the primality test")


class OrderMismatch(ParameterError):
    def __init__(self, p: int, q: int):
        super().__init__(f"q = {q} does not divide p - 1 (p = {p})")


class BadGenerator(ParameterError):
    def __init__(self, g: int, reason: str):
        super().__init__(f"g = {g}: {reason}")


class SubgroupCheckFailed(PairingError):
    """A received public share lies outside the order-q subgroup."""


class RngFailure(PairingError):
    """The injected random source failed to produce output."""


class EmptyMessage(PairingError):
    """Tried to commit to an empty octet string."""


class OpenFailed(PairingError):
    """Commitment digest mismatch: c, nonce, or message was tampered with."""


class MalformedMessage(PairingError):
    """A wire frame or message body violates the framing rules."""


class WrongPhase(PairingError):
    """A protocol operation was invoked out of order."""


class LengthMismatch(PairingError):
    """Two authentication nonces of different bit lengths were combined."""


class KTooLarge(PairingError):
    """Exhaustive enumeration requested above the supported bit length."""


class ChannelClosed(PairingError):
    """The remote endpoint closed the stream."""


class Timeout(PairingError):
    """No frame arrived within the configured read timeout."""
