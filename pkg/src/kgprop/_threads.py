"""Single-threaded BLAS scope for the desk-scale dense kernels.

At 64..128-dimensional matrices the threading handshake costs more than the
arithmetic, and a fixed thread count keeps floating-point reduction order
(and hence every serialized artifact) reproducible across runs.
"""

from threadpoolctl import threadpool_limits


def blas_single_thread():
    """Context manager limiting BLAS pools to one thread."""
    return threadpool_limits(limits=1, user_api="blas")
