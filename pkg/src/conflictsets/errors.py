"""Exception hierarchy shared by all modules."""


class ConflictSetsError(Exception):
    pass


class SceneError(ConflictSetsError, ValueError):
    """Invalid scene description (bad kind, bad coefficients, unknown key...)."""


class DomainError(ConflictSetsError, ValueError):
    """Parameter outside a non-periodic domain."""


class ImmersionError(ConflictSetsError):
    """The embedding is not immersive at the requested parameter."""


class DegenerateCovectorError(ConflictSetsError, ValueError):
    pass


class SingularTimeError(ConflictSetsError):
    """Travel time requested at a point of the source surface itself."""


class PreconditionError(ConflictSetsError, ValueError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NoConvergence(ConflictSetsError):
    def __init__(self, message, point=None, residual_norm=None, iterations=0):
        super().__init__(message)
        self.point = point
        self.residual_norm = residual_norm
        self.iterations = iterations


class SingularJacobian(ConflictSetsError):
    def __init__(self, message, sigma_min=0.0, point=None):
        super().__init__(message)
        self.sigma_min = sigma_min
        self.point = point


class OverdeterminedSceneError(SceneError):
    pass


class DegenerateKiteError(ConflictSetsError):
    def __init__(self, message, condition=float("inf")):
        super().__init__(message)
        self.condition = condition
