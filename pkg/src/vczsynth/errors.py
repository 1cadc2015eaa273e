"""Exception types shared across the package.

Each error maps to one CLI exit code (see :mod:`vczsynth.cli`).
"""


class VczError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ContractViolation(VczError, ValueError):
    """An operation was called with arguments outside its contract."""


class SpecificationInfeasible(VczError):
    """Tightening collapsed a goal or stay set to the empty box."""

    exit_code = 2


class AbstractGoalEmpty(VczError):
    """No grid cell fits inside a tightened goal set."""

    exit_code = 2


class DegenerateHorizon(VczError):
    """The sampling period moves the VCZ across the whole domain in one step."""

    exit_code = 2


class InfeasibleTask(VczError):
    """A fixed-point game has an empty winning domain."""

    exit_code = 2


class CompositionError(VczError):
    """Goal cells of one sub-task are not winning for the next one."""

    exit_code = 2

    def __init__(self, message, cells=()):
        super().__init__(message)
        self.cells = list(cells)


class OutsideDomain(VczError):
    """A concrete state quantized outside the controller's winning domain."""

    exit_code = 3

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class Infeasible(VczError):
    """The torque budget cannot support any VCZ radius."""

    exit_code = 2


class FunnelBreach(VczError):
    """Normalized velocity error left (-1, 1); ``tau`` holds the saturated command."""

    exit_code = 3

    def __init__(self, message, tau=None):
        super().__init__(message)
        self.tau = tau


class ScenarioError(VczError):
    """Scenario file failed to parse or validate."""

    exit_code = 4
