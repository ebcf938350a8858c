from .csr import (CsrMatrix, block_2x2, combine, load_mk_pair, read_matrix_market, spmv,
                  write_matrix_market)
from .factor import (BACKENDS, FactorizedBlock, block_solve, equilibrate, factorize, ilu0,
                     rcm_ordering, sparse_lu)
from .stage import StageOperator, assemble_block, stage_apply

__all__ = [
    "CsrMatrix", "spmv", "combine", "block_2x2", "read_matrix_market", "write_matrix_market",
    "load_mk_pair", "FactorizedBlock", "BACKENDS", "equilibrate", "rcm_ordering", "ilu0",
    "sparse_lu", "factorize", "block_solve", "StageOperator", "stage_apply", "assemble_block",
]
