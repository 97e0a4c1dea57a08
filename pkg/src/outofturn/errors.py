"""Domain exceptions shared across the package.

The service layer maps these onto HTTP status codes, so every error that can
cross the API boundary lives here with a stable ``code`` attribute.
"""

from __future__ import annotations


class OutOfTurnError(Exception):
    """Base class for all domain errors."""

    code = "error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        payload = {"error": self.code, "detail": self.message}
        payload.update(self.details)
        return payload


# Program model -------------------------------------------------------------

class InconsistentAssignment(OutOfTurnError):
    code = "inconsistent-assignment"


class UnknownVariable(OutOfTurnError):
    code = "unknown-variable"


# Partial evaluation ---------------------------------------------------------

class NoSuchEdge(OutOfTurnError):
    code = "no-such-edge"


class ConflictingSteps(OutOfTurnError):
    code = "conflicting-steps"


# Personability analysis -----------------------------------------------------

class InvalidActivity(OutOfTurnError):
    code = "invalid-activity"


# Term mapping ---------------------------------------------------------------

class LexiconError(OutOfTurnError):
    code = "lexicon-error"


class RuleError(OutOfTurnError):
    code = "rule-error"


class Contradiction(OutOfTurnError):
    """Raised when term mapping derives both true and false for one variable.

    ``chain`` holds the human-readable derivation steps that produced the
    conflict, in derivation order.
    """

    code = "contradiction"

    def __init__(self, message: str, chain: list[str] | None = None, **details):
        super().__init__(message, chain=list(chain or []), **details)
        self.chain = list(chain or [])


class AllTermsUnknown(OutOfTurnError):
    code = "all-terms-unknown"

    def __init__(self, message: str, terms: list[str] | None = None, **details):
        super().__init__(message, terms=list(terms or []), **details)
        self.terms = list(terms or [])


# Site ingestion ---------------------------------------------------------------

class ParseError(OutOfTurnError):
    code = "parse-error"

    def __init__(self, message: str, location: str = "", **details):
        super().__init__(message, location=location, **details)
        self.location = location


class SchemaError(OutOfTurnError):
    code = "schema-error"


class AmbiguousLeaf(OutOfTurnError):
    code = "ambiguous-leaf"

    def __init__(self, message: str, item_ids: list[str] | None = None, **details):
        super().__init__(message, item_ids=list(item_ids or []), **details)
        self.item_ids = list(item_ids or [])


class DuplicateAttributeInLabel(OutOfTurnError):
    code = "duplicate-attribute-in-label"


class SizeLimitExceeded(OutOfTurnError):
    code = "size-limit-exceeded"


# Template derivation ----------------------------------------------------------

class TheoryError(OutOfTurnError):
    code = "theory-error"


class NoProof(OutOfTurnError):
    code = "no-proof"

    def __init__(self, message: str, unsatisfied: list[str] | None = None, **details):
        super().__init__(message, unsatisfied=list(unsatisfied or []), **details)
        self.unsatisfied = list(unsatisfied or [])


class ScopeViolation(OutOfTurnError):
    code = "scope-violation"


# Sessions and persistence ------------------------------------------------------

class UnknownSite(OutOfTurnError):
    code = "unknown-site"


class UnknownTemplate(OutOfTurnError):
    code = "unknown-template"


class ScopeMismatch(OutOfTurnError):
    code = "scope-mismatch"


class UnknownSession(OutOfTurnError):
    code = "unknown-session"


class SessionNotActive(OutOfTurnError):
    code = "session-not-active"


class NotSaved(OutOfTurnError):
    code = "not-saved"


class NotCompleted(OutOfTurnError):
    code = "not-completed"


class UnknownAttribute(OutOfTurnError):
    code = "unknown-attribute"


class UnknownRecord(OutOfTurnError):
    code = "unknown-record"


class CorruptRecord(OutOfTurnError):
    code = "corrupt-record"
