import os

# Pin BLAS threading before any test module pulls in numpy: the suite's
# matrices are small enough that thread fan-out slows them down.
for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")
