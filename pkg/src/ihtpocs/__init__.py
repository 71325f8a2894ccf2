"""Few-view CT reconstruction by hard thresholding of the discrete gradient."""
from .core import (ConvergenceTrace, DegenerateInputError, FormatError, Geometry,
                   TraceRecord, delinearize, linearize, read_matrix, write_matrix)
from .dgt import (gradient_magnitude, hard_threshold_pinv, l0_norm, select_threshold,
                  soft_threshold_pinv)
from .metrics import evaluate, naad, nmsd, psnr
from .phantom import forbild_head, shepp_logan
from .projector import back_project, forward_project, ray_row, row_norm_sq, system_matrix
from .solvers import ReconResult, SolverConfig, art_sweep, positivity_clamp, reconstruct
from .sparsity import estimate_sparsity, residual_at

__version__ = "0.1.0"
