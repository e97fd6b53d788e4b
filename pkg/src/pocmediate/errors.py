"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`PocMediateError`
and carries a short machine-readable ``code`` used by the CLI error JSON.
"""


class PocMediateError(Exception):
    code = "error"


class DimensionMismatch(PocMediateError, ValueError):
    code = "dimension_mismatch"


class EmptyEvidenceInterval(PocMediateError, ValueError):
    code = "empty_evidence_interval"


class NonPositiveSigma(PocMediateError, ValueError):
    code = "non_positive_sigma"


class WrongLink(PocMediateError, ValueError):
    code = "wrong_link"


class EmptyResiduals(PocMediateError, ValueError):
    code = "empty_residuals"


class NonInvertibleCdf(PocMediateError, ValueError):
    code = "non_invertible_cdf"


class QuadratureDivergence(PocMediateError, ArithmeticError):
    code = "quadrature_divergence"


class PointEvidence(PocMediateError):
    """Evidence interval carries zero conditional mass; use the indicator case."""

    code = "point_evidence"


class AssumptionViolation(PocMediateError, ValueError):
    code = "assumption_violation"


class RankDeficient(PocMediateError, ValueError):
    code = "rank_deficient"

    def __init__(self, regression, message=None):
        self.regression = regression
        super().__init__(message or f"design matrix of regression {regression!r} is rank deficient")


class InsufficientRows(PocMediateError, ValueError):
    code = "insufficient_rows"


class PerfectSeparation(PocMediateError, ArithmeticError):
    code = "perfect_separation"


class NonBinaryOutcome(PocMediateError, ValueError):
    code = "non_binary_outcome"


class TooManyFailedResamples(PocMediateError, RuntimeError):
    code = "too_many_failed_resamples"


class EvidenceStarvation(PocMediateError, RuntimeError):
    code = "evidence_starvation"

    def __init__(self, retained, n_mc):
        self.retained = retained
        self.n_mc = n_mc
        rate = retained / n_mc if n_mc else 0.0
        super().__init__(
            f"only {retained} of {n_mc} draws satisfied the evidence "
            f"(acceptance rate {rate:.3g}); at least 100 are required"
        )


class MissingColumn(PocMediateError, KeyError):
    code = "missing_column"

    def __str__(self):
        return str(self.args[0]) if self.args else "missing column"


class UnmappableValue(PocMediateError, ValueError):
    code = "unmappable_value"

    def __init__(self, column, row, value):
        self.column = column
        self.row = row
        self.value = value
        super().__init__(f"value {value!r} in column {column!r} (data row {row}) is not numeric and has no encoding")


class EmptyDataset(PocMediateError, ValueError):
    code = "empty_dataset"


class ConfigError(PocMediateError, ValueError):
    code = "config_error"
