# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled local-operator kernels.

``out[l, a, r] += sum_b op[a, b] * v[l, b, r]`` for a state reshaped around a
contiguous group of sites. The accumulation is fused so no temporary of the
full state size is allocated.
"""

ctypedef fused scalar:
    double
    double complex


def accumulate_local(const scalar[:, ::1] op, const scalar[:, :, ::1] v, scalar[:, :, ::1] out):
    cdef Py_ssize_t nl = v.shape[0]
    cdef Py_ssize_t d = v.shape[1]
    cdef Py_ssize_t nr = v.shape[2]
    cdef Py_ssize_t l, a, b, r
    cdef scalar c
    if op.shape[0] != d or op.shape[1] != d:
        raise ValueError("operator shape does not match the grouped dimension")
    if out.shape[0] != nl or out.shape[1] != d or out.shape[2] != nr:
        raise ValueError("output shape mismatch")
    cdef scalar acc
    with nogil:
        if nr >= 16:
            for l in range(nl):
                for a in range(d):
                    for b in range(d):
                        c = op[a, b]
                        if c == 0:
                            continue
                        for r in range(nr):
                            out[l, a, r] += c * v[l, b, r]
        else:
            for l in range(nl):
                for r in range(nr):
                    for a in range(d):
                        acc = 0
                        for b in range(d):
                            acc = acc + op[a, b] * v[l, b, r]
                        out[l, a, r] += acc


def apply_local(const scalar[:, ::1] op, const scalar[:, :, ::1] v, scalar[:, :, ::1] out):
    """Overwrite ``out`` with the grouped-site action of ``op`` on ``v``."""
    cdef Py_ssize_t nl = v.shape[0]
    cdef Py_ssize_t d = v.shape[1]
    cdef Py_ssize_t nr = v.shape[2]
    cdef Py_ssize_t l, a, r
    with nogil:
        for l in range(nl):
            for a in range(d):
                for r in range(nr):
                    out[l, a, r] = 0
    accumulate_local(op, v, out)
