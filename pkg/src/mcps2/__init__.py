"""MCP-regularized sparse regression: certificates, ADMM solvers and experiments."""

__version__ = "0.1.0"

from .conditions import (  # noqa: E402
    CertificateReport,
    Hyperparams,
    candidate_minimizer,
    certify,
    cone_membership,
    corollary1_certificate,
    irr_constant,
    kkt_check_lasso,
    lambda_feasible_range,
    lasso_vsc_certificate,
    lemma1_check,
    mcps2_global_certificate,
    mcps2_local_certificate,
    re_estimate,
)
from .metrics import RecoveryScore, score  # noqa: E402
from .problem import (  # noqa: E402
    GeneratorConfig,
    ProblemInstance,
    generate_instance,
    objective_lasso,
    objective_mcps2,
    restrict_columns,
)
from .solvers import (  # noqa: E402
    SolverResult,
    admm_lasso,
    admm_mcps2,
    global_minimize_bruteforce,
    project_box,
    soft_threshold,
    solve_restricted_convex,
)
