# Fused elementwise kernels for the exponential time stepper.
#
# Each function makes a single pass over C-contiguous arrays, avoiding the
# temporaries a chained numpy expression would allocate.  Signatures mirror
# zk2d._kernels.fallback.

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef double complex zdouble


def fused_axpby(zdouble[:, ::1] out, zdouble[:, ::1] a, zdouble[:, ::1] x,
                zdouble[:, ::1] b, zdouble[:, ::1] y):
    """out = a*x + b*y, elementwise."""
    cdef Py_ssize_t i, j
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            out[i, j] = a[i, j] * x[i, j] + b[i, j] * y[i, j]


def fused_stage_c(zdouble[:, ::1] out, zdouble[:, ::1] e2, zdouble[:, ::1] a_stage,
                  zdouble[:, ::1] q, zdouble[:, ::1] n3, zdouble[:, ::1] n1):
    """out = e2*a_stage + q*(2*n3 - n1)."""
    cdef Py_ssize_t i, j
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            out[i, j] = e2[i, j] * a_stage[i, j] + q[i, j] * (2.0 * n3[i, j] - n1[i, j])


def fused_final(zdouble[:, ::1] out, zdouble[:, ::1] e, zdouble[:, ::1] v,
                zdouble[:, ::1] alpha, zdouble[:, ::1] n1,
                zdouble[:, ::1] beta, zdouble[:, ::1] n2, zdouble[:, ::1] n3,
                zdouble[:, ::1] gamma, zdouble[:, ::1] n4):
    """out = e*v + alpha*n1 + beta*(n2 + n3) + gamma*n4."""
    cdef Py_ssize_t i, j
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            out[i, j] = (e[i, j] * v[i, j] + alpha[i, j] * n1[i, j]
                         + beta[i, j] * (n2[i, j] + n3[i, j])
                         + gamma[i, j] * n4[i, j])


def fused_nonlinear(zdouble[:, ::1] out, zdouble[:, ::1] dxm, zdouble[:, ::1] w,
                    zdouble[:, ::1] v, double vx):
    """out = dxm*(vx*v - w); dxm carries the i*kx derivative factor."""
    cdef Py_ssize_t i, j
    if vx == 0.0:
        for i in range(out.shape[0]):
            for j in range(out.shape[1]):
                out[i, j] = -dxm[i, j] * w[i, j]
    else:
        for i in range(out.shape[0]):
            for j in range(out.shape[1]):
                out[i, j] = dxm[i, j] * (vx * v[i, j] - w[i, j])


def ipow(double[:, ::1] out, double[:, ::1] u, int p):
    """out = u**p for small integer p, via repeated multiplication."""
    cdef Py_ssize_t i, j
    cdef double s
    if p == 2:
        for i in range(out.shape[0]):
            for j in range(out.shape[1]):
                out[i, j] = u[i, j] * u[i, j]
    elif p == 3:
        for i in range(out.shape[0]):
            for j in range(out.shape[1]):
                s = u[i, j]
                out[i, j] = s * s * s
    elif p == 4:
        for i in range(out.shape[0]):
            for j in range(out.shape[1]):
                s = u[i, j] * u[i, j]
                out[i, j] = s * s
    elif p == 5:
        for i in range(out.shape[0]):
            for j in range(out.shape[1]):
                s = u[i, j] * u[i, j]
                out[i, j] = s * s * u[i, j]
    elif p == 1:
        for i in range(out.shape[0]):
            for j in range(out.shape[1]):
                out[i, j] = u[i, j]
    else:
        for i in range(out.shape[0]):
            for j in range(out.shape[1]):
                out[i, j] = u[i, j] ** p
