"""Border rank lower bounds, symmetry algebras, bilinear decompositions and
border apolarity for tensors in A (x) B (x) C."""

from .config import VERSION as __version__
from .tensor import Tensor3, build_family, make_bini, make_cw_little, make_matmul, make_unit
from .bounds import BoundCertificate, best_bound, flattening_bound, koszul_bound, verify_certificate
from .symmetry import symmetry_algebra
from .decomposition import BilinearDecomposition, als_search, verify_decomposition
from .engine import count_operations, recursive_multiply
from .apolarity import apolarity_feasible

__all__ = [
    "__version__",
    "Tensor3",
    "build_family",
    "make_bini",
    "make_cw_little",
    "make_matmul",
    "make_unit",
    "BoundCertificate",
    "best_bound",
    "flattening_bound",
    "koszul_bound",
    "verify_certificate",
    "symmetry_algebra",
    "BilinearDecomposition",
    "als_search",
    "verify_decomposition",
    "count_operations",
    "recursive_multiply",
    "apolarity_feasible",
]
