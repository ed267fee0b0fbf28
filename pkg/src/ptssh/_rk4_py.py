"""Pure numpy twin of the compiled RK4 kernel (same stage order and arithmetic)."""
import numpy as np


def propagate(diag, off, psi, h, n_steps):
    """Advance ``psi`` in place by ``n_steps`` RK4 steps of size ``h``."""
    n = psi.shape[0]
    if diag.shape[0] != n or off.shape[0] != n - 1:
        raise ValueError("band lengths do not match psi")
    if psi.dtype != np.complex128:
        raise TypeError("psi must be complex128")
    diag = np.asarray(diag, dtype=np.complex128)
    off = np.asarray(off, dtype=np.float64)
    k = np.empty_like(psi)
    acc = np.empty_like(psi)
    x = np.empty_like(psi)

    def rhs(src, out):
        # out = -i H src
        np.multiply(diag, src, out=out)
        out[:-1] += off * src[1:]
        out[1:] += off * src[:-1]
        out *= -1j

    for _ in range(int(n_steps)):
        rhs(psi, k)
        acc[:] = k
        np.multiply(k, 0.5 * h, out=x)
        x += psi
        rhs(x, k)
        acc += 2.0 * k
        np.multiply(k, 0.5 * h, out=x)
        x += psi
        rhs(x, k)
        acc += 2.0 * k
        np.multiply(k, h, out=x)
        x += psi
        rhs(x, k)
        acc += k
        psi += (h / 6.0) * acc
    return psi
