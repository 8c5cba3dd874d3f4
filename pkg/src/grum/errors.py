"""Exception hierarchy shared by the library and the command line."""


class GrumError(Exception):
    """Base class for all errors raised by this package."""


class DataValidationError(GrumError, ValueError):
    """Input data violate a schema or a domain invariant."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f"{':' if where else 'line '}{line}"
        super().__init__(f"{where}: {message}" if where else message)


class NumericalFailure(GrumError, ArithmeticError):
    """The estimation problem is ill-posed for the data at hand."""


class ConditionOneError(NumericalFailure):
    """The beats-graph of the profile is not strongly connected.

    Without a proper prior the maximizers of the likelihood are unbounded.
    """

    def __init__(self, witness):
        self.witness = witness
        c1, c2 = witness
        super().__init__(
            f"Condition 1 violated: no alternative in {sorted(c1)} is ranked above "
            f"any alternative in {sorted(c2)}; the MLE is unbounded under a flat prior"
        )


class NotIdentifiableError(NumericalFailure):
    """The linear map from parameters to mean-utility differences is rank deficient."""

    def __init__(self, rank, d):
        self.rank = rank
        self.d = d
        super().__init__(
            f"parameters not identifiable: design rank {rank} < {d} free parameters "
            f"(rank defect {d - rank})"
        )


class SingularDesignError(NumericalFailure):
    """The Newton system of the M-step is singular."""

    def __init__(self, rank, d):
        self.rank = rank
        self.d = d
        super().__init__(
            f"M-step Hessian is singular: rank {rank} < {d} (rank defect {d - rank}); "
            "use a proper prior or an identifiable design"
        )
