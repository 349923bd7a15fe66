"""Exception and warning types shared across the package."""


class RuelleKitError(Exception):
    """Base class for all errors raised by ruelle_kit."""


class InvalidMapError(RuelleKitError, ValueError):
    """Malformed map input (bad coefficients, common roots, degenerate Mobius data)."""


class PreconditionError(RuelleKitError):
    """A map-level precondition does not hold (not normalized, non-simple critical point, ...)."""


class NotNormalizedError(PreconditionError):
    pass


class NonSimpleCriticalPointError(PreconditionError):
    def __init__(self, point, second_derivative):
        self.point = point
        self.second_derivative = second_derivative
        super().__init__(
            f"critical point {complex(point):.6g} is not simple "
            f"(|R''| = {abs(complex(second_derivative)):.3e})"
        )


class RootFindingError(RuelleKitError):
    """Simultaneous iteration did not reach the residual bound.

    Carries the best iterate found and its scaled residual.
    """

    def __init__(self, message, best_roots, residual):
        self.best_roots = best_roots
        self.residual = residual
        super().__init__(f"{message} (scaled residual {residual:.3e})")


class PoleError(RuelleKitError, ZeroDivisionError):
    def __init__(self, pole, z):
        self.pole = pole
        self.z = z
        super().__init__(f"evaluation at z={complex(z):.6g} hits pole {complex(pole):.6g}")


class DegenerateKernelError(RuelleKitError, ValueError):
    """A gamma kernel was requested at base 0 or 1 where it is identically zero."""


class ConditioningError(RuelleKitError):
    pass


class CriticalOrbitError(RuelleKitError):
    """An orbit lands exactly on a critical point, so derivative reciprocals blow up."""


class DivergenceError(RuelleKitError):
    """A series needed to be summable but the evidence says otherwise."""


class ConditioningWarning(UserWarning):
    pass
