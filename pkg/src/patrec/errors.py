"""Exception hierarchy shared across the engine.

Callers that need to map failures onto transport concerns (HTTP status
codes, CLI exit codes) dispatch on these types; everything raised on a
normal control path derives from PatrecError.
"""

from __future__ import annotations


class PatrecError(Exception):
    """Base class for all engine errors."""


class UnknownReferenceError(PatrecError):
    """An id (knowledge base, property, pattern, criterion, session) does not resolve."""


class DomainValueError(PatrecError):
    """A value lies outside the declared domain of its property."""


class InvalidKnowledgeBaseError(PatrecError):
    """An operation requiring a valid knowledge base received an invalid one."""

    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = tuple(violations)


class ConstraintViolatedError(PatrecError):
    """The context assignment violates one or more contextual constraints."""

    def __init__(self, message: str, constraint_ids=()):
        super().__init__(message)
        self.constraint_ids = tuple(constraint_ids)


class DiagnosisPreconditionError(PatrecError):
    """Conflict diagnosis was requested although the feasible set is not empty."""


class IncompleteContextError(PatrecError):
    """Weight resolution needs answers for every property a weight rule guards on."""


class DegenerateWeightsError(PatrecError):
    """All criterion weights clamp to zero; no meaningful normalization exists."""


class EmptyFeasibleSetError(PatrecError):
    """Ranking was requested while no pattern is feasible; diagnose the conflict instead."""


class SessionStateError(PatrecError):
    """An operation was invoked in a session state that does not permit it."""


class StoreError(PatrecError):
    """Base class for session persistence failures."""


class UnknownSessionError(StoreError):
    """No snapshot exists for the requested session id."""


class SnapshotFormatError(StoreError):
    """A snapshot file exists but cannot be decoded."""


class SchemaVersionError(StoreError):
    """A snapshot was written with an incompatible schema version; migration required."""


class ConfigError(PatrecError):
    """Service or CLI configuration is unusable (bad directory, bad listen address, ...)."""
