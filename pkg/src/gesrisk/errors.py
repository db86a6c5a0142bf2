"""Exception hierarchy shared by all modules.

Every error carries a ``code`` of the form ``<module>.<reason>`` so the CLI
can map failures to stable, module-tagged exit diagnostics.
"""

from __future__ import annotations


class GesRiskError(Exception):
    """Base class for all package errors."""

    code = "gesrisk.error"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code

    def __str__(self) -> str:
        return f"[{self.code}] {super().__str__()}"


class UnitModelError(GesRiskError, ValueError):
    code = "unit_model.invalid"


class GridError(GesRiskError, ValueError):
    code = "grid.invalid"


class DispatchError(GesRiskError, ValueError):
    code = "dispatch.invalid"


class RiskError(GesRiskError, ValueError):
    code = "risk.invalid"


class PipelineError(GesRiskError):
    code = "pipeline.error"
