"""Pure-numpy implementations of the time-stepper's elementwise kernels.

Same signatures as the compiled extension; used when the extension is not
built or when ZK2D_PURE_PYTHON is set.  All arrays are C-contiguous 2D,
complex128 except for the real-power kernel.
"""

import numpy as np


def fused_axpby(out, a, x, b, y):
    """out = a*x + b*y, elementwise."""
    np.multiply(a, x, out=out)
    out += b * y


def fused_stage_c(out, e2, a_stage, q, n3, n1):
    """out = e2*a_stage + q*(2*n3 - n1)."""
    np.multiply(e2, a_stage, out=out)
    out += q * (2.0 * n3 - n1)


def fused_final(out, e, v, alpha, n1, beta, n2, n3, gamma, n4):
    """out = e*v + alpha*n1 + beta*(n2 + n3) + gamma*n4."""
    np.multiply(e, v, out=out)
    out += alpha * n1
    out += beta * (n2 + n3)
    out += gamma * n4


def fused_nonlinear(out, dxm, w, v, vx):
    """out = dxm*(vx*v - w); dxm carries the i*kx derivative factor."""
    if vx == 0.0:
        np.multiply(dxm, w, out=out)
        np.negative(out, out=out)
    else:
        np.subtract(vx * v, w, out=out)
        out *= dxm


def ipow(out, u, p):
    """out = u**p for small integer p, via repeated multiplication."""
    if p == 1:
        np.copyto(out, u)
    elif p == 2:
        np.multiply(u, u, out=out)
    elif p == 3:
        np.multiply(u, u, out=out)
        out *= u
    elif p == 4:
        np.multiply(u, u, out=out)
        np.multiply(out, out, out=out)
    elif p == 5:
        np.multiply(u, u, out=out)
        np.multiply(out, out, out=out)
        out *= u
    else:
        np.power(u, p, out=out)
