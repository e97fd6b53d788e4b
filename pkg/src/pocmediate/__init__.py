"""Path-specific probabilities of necessity and sufficiency for a treatment
acting through two causally ordered mediators."""

__version__ = "0.1.0"

from .errors import PocMediateError  # noqa: E402
from .estimate import BootstrapConfig, Dataset, bootstrap_ci, estimate_decomposition, fit_logistic, fit_ols  # noqa: E402
from .identify import (  # noqa: E402
    decompose,
    gamma_delta,
    make_engine,
    point_evidence_indicators,
    quantile_map,
    theta_linear,
    theta_logistic,
    theta_quadrature,
)
from .model import (  # noqa: E402
    Evidence,
    GammaDelta,
    LinearScmSpec,
    MediationFit,
    PnsDecomposition,
    PnsQuery,
    ThetaArgs,
    validate_query,
)
from .simulate import oracle_decompose, oracle_theta, sample_dataset  # noqa: E402
from .trimediator import TriDecomposition, TriScmSpec, tri_oracle_decompose  # noqa: E402

__all__ = [
    "BootstrapConfig", "Dataset", "Evidence", "GammaDelta", "LinearScmSpec", "MediationFit",
    "PnsDecomposition", "PnsQuery", "PocMediateError", "ThetaArgs", "TriDecomposition", "TriScmSpec",
    "bootstrap_ci", "decompose", "estimate_decomposition", "fit_logistic", "fit_ols", "gamma_delta",
    "make_engine", "oracle_decompose", "oracle_theta", "point_evidence_indicators", "quantile_map",
    "sample_dataset", "theta_linear", "theta_logistic", "theta_quadrature", "tri_oracle_decompose",
    "validate_query",
]
