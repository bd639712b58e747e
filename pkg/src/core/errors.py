from fastapi import status


class OdbssError(Exception):
    """Base class for every error raised by the subsampling library."""

    status_code: int = status.HTTP_422_UNPROCESSABLE_ENTITY

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InvalidArgumentError(OdbssError):
    pass


class NumericOverflowError(OdbssError):
    def __init__(self, row: int, value: float):
        super().__init__(f"Variance overflow at row {row}: log-variance {value:.4g} outside [-700, 700]")
        self.row = row
        self.value = value


class SeparationError(OdbssError):
    def __init__(self, detail: str = "Coefficients diverge; the responses are (quasi-)separated"):
        super().__init__(detail)


class DegenerateDataError(OdbssError):
    pass


class TooManyCandidatesError(OdbssError):
    status_code = status.HTTP_413_REQUEST_ENTITY_TOO_LARGE

    def __init__(self, count: int, budget: int):
        super().__init__(
            f"Grid has {count} candidates, budget is {budget}; use the Metropolis-Hastings design space instead"
        )


class StalledChainError(OdbssError):
    status_code = status.HTTP_500_INTERNAL_SERVER_ERROR

    def __init__(self, cluster: int, accepted: int, proposals: int):
        super().__init__(
            f"Chain for cluster {cluster} stalled: {accepted} of {proposals} proposals accepted; "
            "reduce the proposal scale"
        )


class InfeasibleDesignError(OdbssError):
    def __init__(self, rank: int, dim: int):
        super().__init__(f"Candidates span information of rank {rank} < {dim}; no nonsingular design exists")


class InvalidReferenceError(OdbssError):
    def __init__(self):
        super().__init__("Reference design has criterion value 0")


class DesignSpaceEmptyError(OdbssError):
    def __init__(self):
        super().__init__("Estimated design space is empty (every candidate is an outlier)")


class ShortfallError(OdbssError):
    def __init__(self, requested: int, available: int):
        super().__init__(f"Requested {requested} rows but only {available} are available")
        self.shortfall = requested - available


class DecompositionError(OdbssError):
    pass
