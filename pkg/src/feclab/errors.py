"""Exception types shared across the package.

Everything raised on purpose derives from FeclabError so callers can catch
one base class at the CLI boundary and map it to an exit code.
"""


class FeclabError(Exception):
    """Base class for all errors raised deliberately by this package."""


class MeshError(FeclabError):
    """Invalid simplicial complex (bad counts, broken incidence, ...)."""


class DegenerateCellError(MeshError):
    """A top cell has (numerically) zero volume or a rank-deficient chart."""


class SingularMapError(FeclabError):
    """A chart or projection map has a rank-deficient Jacobian."""


class DegenerateMetricError(FeclabError):
    """A metric evaluation is not symmetric positive definite."""


class ComplexMismatchError(FeclabError):
    """Operands were built on different simplicial complexes."""


class BettiMismatchError(FeclabError):
    """Spectral structure contradicts the declared Betti number."""


class SolverError(FeclabError):
    """Linear solve failed or did not reach the required residual."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConfigError(FeclabError):
    """Invalid experiment configuration; collects every problem found."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
