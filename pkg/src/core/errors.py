"""
Exception hierarchy shared by every package in the project.
Library code raises these; only the command-line entry point turns them
into log lines and exit codes.
"""


class DeepExplorationError(Exception):
    """Base class for all project errors"""


class ConfigError(DeepExplorationError, ValueError):
    """Invalid experiment, network or agent configuration"""


class ShapeError(DeepExplorationError, ValueError):
    """Array dimensions do not match what a network expects"""


class UsageError(DeepExplorationError, RuntimeError):
    """An API was called in a state where the call makes no sense"""


class ContractViolation(DeepExplorationError, RuntimeError):
    """An action outside the environment's constraint set"""


class NumericError(DeepExplorationError, ArithmeticError):
    """Non-finite values reached a loss, gradient or parameter"""


class ValidationError(DeepExplorationError, ValueError):
    """Input artifacts (rosters, CSVs, checkpoints) failed validation"""
