"""Domain errors raised by the engine; the API and CLI translate them."""

from typing import Optional


class ScenarioError(ValueError):
    """A scenario document could not be turned into a valid Scenario."""


class ScenarioSyntaxError(ScenarioError):
    """The document is not well-formed JSON."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ScenarioSemanticError(ScenarioError):
    """The document parses but violates a scenario invariant."""


class UnknownApplianceClassError(ScenarioError):
    """A home block names an appliance class the engine does not model."""


class PreconditionError(ValueError):
    """An operation was called outside its domain."""


class ScheduleViolation(ValueError):
    """A schedule breaks a power bound or the washing contiguity rule."""

    def __init__(self, message: str, appliance: str, slot: Optional[int]):
        where = f"{appliance} at slot {slot}" if slot is not None else appliance
        super().__init__(f"{where}: {message}")
        self.appliance = appliance
        self.slot = slot


class InstanceTooLargeError(ValueError):
    """An exhaustive oracle was asked to enumerate more than its bound."""
