"""kernelblend: label-aware kernel combination, one-class SVMs, and a benchmark CLI."""

from .combine import (
    CombinerConfig,
    LabelDiagonal,
    combine_abs_form,
    combine_multi,
    combine_pairwise_maxmin,
    combine_test_rows,
)
from .kernels import (
    GramMatrix,
    KernelSpec,
    cross_gram,
    eval_kernel,
    gram_matrix,
    load_precomputed_gram,
    psd_repair,
)
from .qp import (
    BoxQP,
    ConvergenceError,
    DualSolution,
    SolverConfig,
    brute_force_qp,
    kkt_certificate,
    solve_csvm_dual,
    solve_oneclass_dual,
    solver_backends,
)

__version__ = "0.1.0"

__all__ = [
    "BoxQP",
    "CombinerConfig",
    "ConvergenceError",
    "DualSolution",
    "GramMatrix",
    "KernelSpec",
    "LabelDiagonal",
    "SolverConfig",
    "__version__",
    "brute_force_qp",
    "combine_abs_form",
    "combine_multi",
    "combine_pairwise_maxmin",
    "combine_test_rows",
    "cross_gram",
    "eval_kernel",
    "gram_matrix",
    "kkt_certificate",
    "load_precomputed_gram",
    "psd_repair",
    "solve_csvm_dual",
    "solve_oneclass_dual",
    "solver_backends",
]
