class ChdgError(Exception):
    pass


class ConfigError(ChdgError):
    """
    Raised with every validation problem found in a run configuration, not
    just the first one.
    """
    
    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__('; '.join(self.errors))


class MeshError(ChdgError, ValueError):
    pass


class QuadratureError(ChdgError, ValueError):
    pass


class SpaceMismatch(ChdgError, ValueError):
    pass


class CellIndexError(ChdgError, IndexError):
    pass


class UnknownTestCase(ChdgError, ValueError):
    pass


class InterfaceError(ChdgError, ValueError):
    pass


class DumpFormatError(ChdgError, ValueError):
    pass


class SolverError(ChdgError):
    pass


class LinearSolveFailure(SolverError):
    pass


class NewtonDivergence(SolverError):
    def __init__(self, message, iterations=None, residuals=None):
        self.iterations = iterations
        self.residuals = residuals or []
        super().__init__(message)


class ConservationError(SolverError):
    pass


class SpectrumError(SolverError):
    pass


class ConditionViolated(ChdgError):
    """
    The positivity condition of the nonlinear Gronwall bound fails; ``index``
    is the first failing sequence index.
    """
    
    def __init__(self, index):
        self.index = index
        super().__init__('Gronwall positivity condition fails at l=%d' % index)
