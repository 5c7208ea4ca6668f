"""test utility functions

Independent oracles used to check the library against straightforward reference computations.
"""

import numpy as np
from scipy import special


def jacobi_eigenvalues(h: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues (ascending) of a Hermitian matrix by cyclic Jacobi rotations.

    The complex n x n matrix is embedded as the real symmetric 2n x 2n matrix [[Re, -Im], [Im, Re]],
    whose spectrum is that of h with every eigenvalue doubled.
    """
    a = np.block([[h.real, -h.imag], [h.imag, h.real]]).astype(float)
    n = a.shape[0]
    scale = np.linalg.norm(a)
    for _ in range(max_sweeps):
        if np.sqrt(np.sum(np.tril(a, -1) ** 2)) <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = 1.0 if theta == 0 else np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
    return np.sort(np.diag(a))[::2]


def gaussian_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solves a x = b by Gaussian elimination with partial pivoting. b may have several columns."""
    a = np.array(a, dtype=complex)
    b = np.array(b, dtype=complex)
    n = a.shape[0]
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
        factors = a[k + 1 :, k] / a[k, k]
        a[k + 1 :] -= np.outer(factors, a[k])
        b[k + 1 :] -= np.outer(factors, b[k]) if b.ndim == 2 else factors * b[k]
    x = np.zeros_like(b)
    for k in reversed(range(n)):
        x[k] = (b[k] - a[k, k + 1 :] @ x[k + 1 :]) / a[k, k]
    return x


def normal_equations_inverse(m: np.ndarray, alpha: float) -> np.ndarray:
    """(M^H M + alpha^2 I)^-1 M^H"""
    mh = m.conj().T
    return gaussian_solve(mh @ m + alpha * alpha * np.eye(m.shape[1]), mh)


def scan_roots(l: int, v: float, points: int = 200000) -> list[float]:
    """Roots of the LP dispersion function located as + to - sign changes on a dense grid.

    Poles of u J_{l-1}(u)/J_l(u) change sign from - to + and are therefore not counted.
    """
    u = np.linspace(1e-6, v * (1.0 - 1e-9), points)
    w = np.sqrt(v * v - u * u)
    with np.errstate(all="ignore"):
        f = u * special.jv(l - 1, u) / special.jv(l, u) + w * special.kv(l - 1, w) / special.kv(l, w)
    finite = np.isfinite(f[:-1]) & np.isfinite(f[1:])
    crossings = np.flatnonzero(finite & (f[:-1] > 0) & (f[1:] < 0))
    return [float((u[i] + u[i + 1]) / 2) for i in crossings]


def topk_by_sort(y, k: int) -> set[int]:
    """k largest magnitudes by a full sort, lower index first on ties"""
    magnitudes = [abs(v) for v in y]
    return set(sorted(range(len(magnitudes)), key=lambda i: (-magnitudes[i], i))[:k])


def random_complex(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)
