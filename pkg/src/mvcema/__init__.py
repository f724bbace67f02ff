"""Volume-regularized end-member analysis of grain-size distributions."""
__version__ = "0.1.0"

from .apfgm import (Factorization, GsdMatrix, OuterSettings, RunReport, VolumeConfig,  # noqa: E402
                    initialize, objective, run_apfgm, scale_lambda, update_g, update_w)
from .metrics import align, check_ssc1, maab, maem, volume  # noqa: E402
from .simplex_qp import PfgmSettings, QpProblem, project_simplex, solve_qp_simplex  # noqa: E402
