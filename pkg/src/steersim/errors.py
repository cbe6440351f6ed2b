"""Exception hierarchy.

Physics errors (anything raised while evaluating a model) derive from
:class:`PhysicsError`; the CLI maps those to exit code 3.  Configuration
problems derive from :class:`ConfigInvalid` and map to exit code 2.
"""


class SteersimError(Exception):
    pass


class PhysicsError(SteersimError):
    pass


class GridTooCoarse(PhysicsError):
    pass


class OutOfRange(PhysicsError):
    pass


class GridMismatch(PhysicsError):
    pass


class EmptySpectrum(PhysicsError):
    pass


class AliasingRisk(PhysicsError):
    pass


class UnsupportedSource(PhysicsError):
    pass


class MissingField(PhysicsError):
    pass


class NegativeTau(PhysicsError):
    pass


class DivisionByZeroTau(PhysicsError):
    pass


class IncompatibleScheme(PhysicsError):
    pass


class NoHeralds(PhysicsError):
    pass


class TooFewPoints(PhysicsError):
    pass


class DegeneratePattern(PhysicsError):
    pass


class NonMonotoneScan(SteersimError):
    """Scan classifications interleave; no threshold can be claimed."""

    def __init__(self, message, scan_points=None):
        super().__init__(message)
        self.scan_points = scan_points


class ConfigInvalid(SteersimError):
    pass
