"""Philox4x32-10 counter-based generator and uniform/normal transforms.

Every function here is written so that the same source works elementwise on
numpy ``uint64`` arrays and, once wrapped with ``numba.njit``, on scalars.
All integer state is kept in ``uint64`` with explicit 32-bit masking; never
mix Python ints into these expressions (numba promotes uint64 op int64 to
float64).
"""

import numpy as np

M0 = np.uint64(0xD2511F53)
M1 = np.uint64(0xCD9E8D57)
W0 = np.uint64(0x9E3779B9)
W1 = np.uint64(0xBB67AE85)
MASK32 = np.uint64(0xFFFFFFFF)
SHIFT32 = np.uint64(32)
SHIFT6 = np.uint64(6)

TWO26 = 67108864.0
INV_TWO52 = 1.0 / 4503599627370496.0
TWO_PI = 6.283185307179586

# stream tags (fourth counter word)
TAG_GAUSS = np.uint64(1)
TAG_POISSON = np.uint64(2)
TAG_JUMP = np.uint64(3)
TAG_GAMMA_NORMAL = np.uint64(4)
TAG_GAMMA_ACCEPT = np.uint64(5)
TAG_GAMMA_BOOST = np.uint64(6)
TAG_CHILD = np.uint64(0xFFFFFFFF)


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds; returns the four 32-bit output words."""
    for _ in range(10):
        p0 = M0 * c0
        p1 = M1 * c2
        n0 = (p1 >> SHIFT32) ^ c1 ^ k0
        n1 = p1 & MASK32
        n2 = (p0 >> SHIFT32) ^ c3 ^ k1
        n3 = p0 & MASK32
        c0 = n0
        c1 = n1
        c2 = n2
        c3 = n3
        k0 = (k0 + W0) & MASK32
        k1 = (k1 + W1) & MASK32
    return c0, c1, c2, c3


def words_to_open_uniform(hi, lo):
    """``(k + 1/2) / 2**52`` for a 52-bit ``k`` built from two 32-bit words.

    Every value is exact, so the result lies in [2**-53, 1 - 2**-53].  (With
    53 bits the half offset is not representable above 1/2 and rounds onto 1.)
    """
    return ((hi >> SHIFT6) * TWO26 + (lo >> SHIFT6) + 0.5) * INV_TWO52


def uniform_pair(c0, c1, c2, c3, k0, k1):
    x0, x1, x2, x3 = philox4x32(c0, c1, c2, c3, k0, k1)
    return words_to_open_uniform(x0, x1), words_to_open_uniform(x2, x3)


def split_key(root):
    root = np.uint64(root)
    return root & MASK32, root >> SHIFT32
