"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def accumulate_local(op, v, out):
    if op.shape != (v.shape[1], v.shape[1]) or out.shape != v.shape:
        raise ValueError("shape mismatch between operator, state and output")
    out += np.matmul(op, v)


def apply_local(op, v, out):
    np.matmul(op, v, out=out)
