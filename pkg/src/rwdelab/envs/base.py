"""Shared environment plumbing: censoring errors and the oracle protocol."""

from __future__ import annotations

from typing import Protocol, runtime_checkable

from ..lattice import Site


class CensoredError(RuntimeError):
    """A lazily evaluated quantity could not be certified within its budget.

    Carries whatever partial state the caller may want to report; censored
    results are never silently dropped.
    """

    def __init__(self, message: str, **partial):
        super().__init__(message)
        self.partial = partial


class CensoredValueError(CensoredError):
    """Chain value did not stabilize within the backward-depth budget."""


class CensoredTimeError(CensoredError):
    """A stopping-time scan exceeded its horizon."""


class CensoredFieldError(CensoredError):
    """A field indicator depends on a censored sub-query."""


@runtime_checkable
class EnvironmentView(Protocol):
    """One realization of one environment family, lazily evaluable.

    omega() is the walk-driving state at a site; eta_s() the truncated
    regeneration indicator.  Both are pure functions of (config, seed,
    site); any internal caching must be observably absent.
    """

    seed: int

    def omega(self, z: Site) -> int: ...

    def eta_s(self, z: Site) -> int: ...

    @property
    def d(self) -> int: ...

    @property
    def cone_slope(self) -> int: ...
