"""Scenario schema, runner, reports and built-in experiments."""

from typing import Optional


class HarnessError(Exception):
    """Base exception for harness errors."""
    pass


class ScenarioError(HarnessError):
    """Raised when a scenario is invalid or one of its actions fails."""

    def __init__(self, message: str, step: Optional[int] = None, action: Optional[str] = None) -> None:
        prefix = f"step {step} ({action}): " if step is not None else ""
        super().__init__(prefix + message)
        self.step = step
        self.action = action


class UnknownScenario(HarnessError):
    """Raised when a scenario name is neither built in nor a readable file."""
    pass


class UnsupportedFormat(HarnessError):
    """Raised when a report format is not text or json."""
    pass
