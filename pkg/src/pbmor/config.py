"""Package-wide numerical defaults.

The values are module attributes so that callers can override them at
runtime, e.g. ``pbmor.config.MAX_DENSE_SIZE = 20000``.
"""

#: largest n for which dense LU factorizations are attempted
MAX_DENSE_SIZE = 5000

#: largest row count of a materialized I_{m^k} (x) M
MAX_KRON_ROWS = 1_000_000

#: reciprocal condition estimate below which a matrix is treated as singular
RCOND_TOL = 1e-14

#: relative size of an imaginary part that is discarded when demoting to real
IMAG_TOL = 1e-12

#: largest subsystem index k accepted by the transfer-function evaluators
MAX_SUBSYSTEM = 4

#: largest column count produced by the all-orderings basis recursion
MAX_BASIS_COLUMNS = 2000

#: time stepping switches to sparse LU above this state size ...
SPARSE_MIN_SIZE = 400

#: ... when the step matrices have at most this fraction of nonzeros
SPARSE_MAX_DENSITY = 0.05
