"""Pure numpy implementations of the pointwise and reduction kernels.

Every routine here has a compiled twin in ``_kernels.pyx``; both follow the
same operation order so results agree bit for bit.
"""
import numpy as np


def pairwise_sum(x):
    x = np.ascontiguousarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        return 0.0
    while x.size > 1:
        if x.size % 2:
            x = np.append(x, 0.0)
        x = x[0::2] + x[1::2]
    return float(x[0])


def pairing_field(a, b):
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(6, -1)
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(6, -1)
    out = a[0] * b[5]
    out = out + a[5] * b[0]
    out = out - a[1] * b[4]
    out = out - a[4] * b[1]
    out = out + a[2] * b[3]
    out = out + a[3] * b[2]
    return out


def herm2_det(a, d, b, c):
    """det [[a, b+ic], [b-ic, d]] evaluated pointwise on flat arrays."""
    a = np.ascontiguousarray(a, dtype=np.float64).ravel()
    d = np.ascontiguousarray(d, dtype=np.float64).ravel()
    b = np.ascontiguousarray(b, dtype=np.float64).ravel()
    c = np.ascontiguousarray(c, dtype=np.float64).ravel()
    out = a * d
    out = out - b * b
    out = out - c * c
    return out
