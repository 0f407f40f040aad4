# Copyright © 2025 Sierra Labs LLC
# SPDX-License-Identifier: AGPL-3.0-only
# License-Filename: LICENSE

"""
Exception hierarchy for oscilab.

Two families map onto CLI exit codes: input problems (2) and numerical
tolerance failures (3).
"""

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class OscilabError(Exception):
    """Base class for all oscilab errors."""
    exit_code = 1


class ValidationError(OscilabError, ValueError):
    """Input or contract violation detected before any numerics run."""
    exit_code = EXIT_VALIDATION


class CohomologicalObstructionError(ValidationError):
    """Right-hand side of a cohomological equation has a resonant part."""


class OverlappingToriError(ValidationError):
    """Superposed quasimodes live on tori that are not separated."""


class ClusterAmbiguityError(ValidationError):
    """Perturbed eigenvalues cannot be assigned to a unique unperturbed one."""


class PersistenceError(OscilabError):
    """Run store or matrix cache could not be read or written."""


class NumericalToleranceError(OscilabError, RuntimeError):
    """A computed quantity failed its accuracy contract."""
    exit_code = EXIT_NUMERICAL


class BandOverflowError(NumericalToleranceError):
    """A quantity reached basis levels outside the reliable band."""


class ConvergenceError(NumericalToleranceError):
    """Quadrature or integrator refinement did not converge."""


class EhrenfestBudgetError(NumericalToleranceError):
    """Propagation time exceeds the configured Ehrenfest budget."""


class BranchDiscontinuityError(NumericalToleranceError):
    """det Q square-root branch jumped along a path."""


class SymplecticDriftError(NumericalToleranceError):
    """Linearized flow lost symplecticity beyond tolerance."""


def exit_code_for(error: BaseException) -> int:
    """
    Map an exception to a CLI exit code.

    Args:
        error: Raised exception

    Returns:
        Exit code (2 validation, 3 numerical, 1 anything else)
    """
    if isinstance(error, OscilabError):
        return error.exit_code
    if isinstance(error, (ValueError, FileNotFoundError)):
        return EXIT_VALIDATION
    return 1
