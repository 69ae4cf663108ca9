"""Pure-NumPy Crank-Nicolson stepping kernel (fallback implementation).

Semantics are shared with the compiled extension ``resonlab._cnkernel``:
advance a batch of fields U (one column per mode, one row per grid node)
through ``len(dc_mid)`` CN steps of

    (I + 1j*kappa*H_s) u_{s+1} = (I - 1j*kappa*H_s) u_s + src[s] * e_{src_row},

where H_s is the tridiagonal (dl, d0, du) plus the time-dependent well entry
``dc_mid[s]`` added at (jc, jc), and kappa = dt/(2*eps).  The return value is
the largest per-step, per-mode norm growth ratio (exactly 1.0 or below for
an accretive generator, up to roundoff).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = ["cn_run"]


def cn_run(dl: np.ndarray, d0: np.ndarray, du: np.ndarray, jc: int,
           dc_mid: np.ndarray, kappa: float, U: np.ndarray,
           src: np.ndarray | None = None, src_row: int = -1) -> float:
    """Advance U (nodes x modes) in place; see module docstring."""
    n = d0.size
    if U.shape[0] != n:
        raise ValueError("U row count must match the operator size")
    nsteps = dc_mid.size
    ik = 1j * kappa

    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = ik * du
    ab[2, :-1] = ik * dl
    upper = (ik * du)[:, None]
    lower = (ik * dl)[:, None]

    growth_max = 0.0
    for s in range(nsteps):
        diag = d0.copy()
        diag[jc] += dc_mid[s]
        ikd = ik * diag
        y = U * (1.0 - ikd)[:, None]
        y[:-1] -= upper * U[1:]
        y[1:] -= lower * U[:-1]
        if src is not None:
            y[src_row] += src[s]
        ab[1, :] = 1.0 + ikd
        before = np.einsum("ij,ij->j", U.real, U.real) \
            + np.einsum("ij,ij->j", U.imag, U.imag)
        U[:] = scipy.linalg.solve_banded((1, 1), ab, y, overwrite_b=True,
                                         check_finite=False)
        after = np.einsum("ij,ij->j", U.real, U.real) \
            + np.einsum("ij,ij->j", U.imag, U.imag)
        nz = before > 0.0
        if np.any(nz):
            growth = float(np.max(np.sqrt(after[nz] / before[nz])))
            growth_max = max(growth_max, growth)
    return growth_max
