"""Exception types raised by the numerical layers and the CLI."""

from __future__ import annotations


class HfcError(Exception):
    """Base class for all package errors."""


class SingularResolvent(HfcError, ArithmeticError):
    """zI - A is singular (or numerically so) at the requested point."""


class NotSimultaneouslyDiagonalizable(HfcError, ArithmeticError):
    """No common eigenbasis exists within tolerance."""


class NonCommutingTuple(HfcError, ValueError):
    """Operators handed to a CommutingTuple fail the commutation guard."""


class BranchCutViolation(HfcError, ArithmeticError):
    """A principal-branch function was asked to act across (-inf, 0]."""


class DomainViolation(HfcError, ValueError):
    """A sector function was evaluated outside its open declared domain."""


class AngleOrderViolation(HfcError, ValueError):
    """Contour angle does not separate the spectrum from the function's domain boundary."""


class DegenerateCalibration(HfcError, ArithmeticError):
    """The calibration integral is too small to be inverted."""


class TypeTooLarge(HfcError, ValueError):
    """Sectoriality type is at least pi/2 where a semigroup is required."""


class QuadratureSelfTestError(HfcError, RuntimeError):
    """The Cauchy self-test of a contour quadrature failed."""


class SchemaError(HfcError, ValueError):
    """A problem file failed schema validation or could not be parsed."""
