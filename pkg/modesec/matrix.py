"""
Dense complex matrix services.

Transmission matrices are plain complex numpy arrays (N x N). This module provides the SVD,
the Tikhonov regularized inverse used for inverse precoding, synthetic transmission matrices
(Haar unitary and weakly coupled unitary), measurement noise emulation, the transmit power
normalizations and the precoding efficiency measure.

Regularization is described by an alpha rule:

- "paper-default": alpha = 0.12 * largest singular value
- "relative:<f>": alpha = f * largest singular value
- a non-negative number: absolute alpha
"""

import json
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from util import Seed, atomic_write, complex_gaussian, make_rng

# Logging setup
logger = logging.getLogger("matrix")

PAPER_DEFAULT = "paper-default"
PAPER_DEFAULT_FRACTION = 0.12
RELATIVE_PREFIX = "relative:"

AlphaRule = str | float


# ---------------------------
# Exceptions
# ---------------------------
@dataclass
class MatrixException(Exception):
    value: str


@dataclass(frozen=True)
class SvdFactors:
    """m = left_vectors @ diag(singular_values) @ right_vectors_conjugated"""

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors_conjugated: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors_conjugated

    @property
    def sigma_max(self) -> float:
        return float(self.singular_values[0]) if len(self.singular_values) > 0 else 0.0


def as_matrix(m) -> np.ndarray:
    """Validated 2-D complex array with finite entries"""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise MatrixException(f"Expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise MatrixException("Matrix contains non-finite entries")
    return m


def as_square(m) -> np.ndarray:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise MatrixException(f"Expected a square matrix, got shape {m.shape}")
    return m


# ---------------------------
# SVD and inversion
# ---------------------------
def svd(m) -> SvdFactors:
    """Singular value decomposition, singular values descending.

    Uses the divide-and-conquer driver and retries with gesvd if that does not converge.

    :raises:
    MatrixException: If neither driver converges.
    """
    m = as_matrix(m)
    for driver in ["gesdd", "gesvd"]:
        try:
            u, s, vh = scipy.linalg.svd(m, full_matrices=False, lapack_driver=driver)
            if driver != "gesdd":
                logger.warning(f"SVD of {m.shape[0]}x{m.shape[1]} matrix needed fallback driver {driver}")
            return SvdFactors(left_vectors=u, singular_values=s, right_vectors_conjugated=vh)
        except np.linalg.LinAlgError as e:
            logger.debug(f"SVD driver {driver} failed: {e}")
    e = f"SVD of {m.shape[0]}x{m.shape[1]} matrix did not converge with gesdd or gesvd"
    logger.error(e)
    raise MatrixException(e)


def resolve_alpha(alpha_rule: AlphaRule, sigma_max: float) -> float:
    """Absolute regularization parameter for an alpha rule, given the largest singular value."""
    if isinstance(alpha_rule, str):
        rule = alpha_rule.strip()
        if rule == PAPER_DEFAULT:
            return PAPER_DEFAULT_FRACTION * sigma_max
        if rule.startswith(RELATIVE_PREFIX):
            fraction = _non_negative(rule[len(RELATIVE_PREFIX) :], alpha_rule)
            return fraction * sigma_max
        return _non_negative(rule, alpha_rule)
    return _non_negative(alpha_rule, alpha_rule)


def _non_negative(value, rule) -> float:
    try:
        result = float(value)
    except (TypeError, ValueError):
        raise MatrixException(f"Invalid alpha rule {rule!r}")
    if not math.isfinite(result) or result < 0:
        raise MatrixException(f"Alpha must be a finite non-negative value, got {rule!r}")
    return result


def validate_alpha_rule(alpha_rule: AlphaRule) -> AlphaRule:
    """Checks alpha_rule parses. Returns it unchanged."""
    resolve_alpha(alpha_rule, 1.0)
    return alpha_rule


def filter_singular_values(s: np.ndarray, alpha: float) -> np.ndarray:
    """sigma / (sigma^2 + alpha^2). Zero singular values map to zero."""
    denominator = s * s + alpha * alpha
    safe = np.where(denominator > 0, denominator, 1.0)
    return np.where(denominator > 0, s / safe, 0.0)


def tikhonov_inverse(m, alpha_rule: AlphaRule = PAPER_DEFAULT) -> np.ndarray:
    """Tikhonov regularized inverse V S_filtered U^H.

    :raises:
    MatrixException: All-zero matrix with alpha = 0, or invalid alpha rule.
    """
    factors = svd(m)
    alpha = resolve_alpha(alpha_rule, factors.sigma_max)
    if factors.sigma_max == 0.0 and alpha == 0.0:
        e = "Inverse of an all-zero matrix is undefined with alpha = 0"
        logger.error(e)
        raise MatrixException(e)
    filtered = filter_singular_values(factors.singular_values, alpha)
    return (factors.right_vectors_conjugated.conj().T * filtered) @ factors.left_vectors.conj().T


# ---------------------------
# Synthetic transmission matrices
# ---------------------------
def haar_unitary(n: int, seed: Seed) -> np.ndarray:
    """Haar distributed n x n unitary: QR of a complex Gaussian matrix with the diagonal phase of R moved into Q."""
    if n < 1:
        raise MatrixException(f"Dimension must be positive, got {n}")
    rng = make_rng(seed)
    z = complex_gaussian(rng, (n, n), 1.0 / math.sqrt(2.0))
    q, r = scipy.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def coupled_unitary(n: int, epsilon: float, seed: Seed) -> np.ndarray:
    """exp(i * epsilon * G) for a random Hermitian G. epsilon = 0 is the identity, larger epsilon mixes more."""
    if n < 1:
        raise MatrixException(f"Dimension must be positive, got {n}")
    if epsilon < 0:
        raise MatrixException(f"Coupling strength must be non-negative, got {epsilon}")
    if epsilon == 0:
        return np.eye(n, dtype=complex)
    rng = make_rng(seed)
    a = complex_gaussian(rng, (n, n), 1.0 / math.sqrt(2.0))
    g = (a + a.conj().T) / 2.0
    eigenvalues, eigenvectors = scipy.linalg.eigh(g)
    return (eigenvectors * np.exp(1j * epsilon * eigenvalues)) @ eigenvectors.conj().T


def emulate_measurement(m, sigma_meas: float, seed: Seed) -> np.ndarray:
    """m plus complex Gaussian noise with RMS magnitude sigma_meas * RMS(|m_ij|) per entry."""
    m = as_matrix(m)
    if sigma_meas < 0:
        raise MatrixException(f"Measurement noise must be non-negative, got {sigma_meas}")
    if sigma_meas == 0:
        return m.copy()
    rms = math.sqrt(float(np.mean(np.abs(m) ** 2)))
    return m + complex_gaussian(make_rng(seed), m.shape, sigma_meas * rms / math.sqrt(2.0))


# ---------------------------
# Normalizations and efficiency
# ---------------------------
def normalize_unit(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    norm = np.linalg.norm(x)
    if norm == 0:
        raise MatrixException("Cannot normalize a zero vector")
    return x / norm


def precoding_divisor(t_inv) -> float:
    """sqrt(tr(t_inv t_inv^H)), i.e. the Frobenius norm of t_inv"""
    t_inv = as_square(t_inv)
    trace = float(np.real(np.trace(t_inv @ t_inv.conj().T)))
    if trace <= 0:
        raise MatrixException("Precoding normalization undefined: trace of t_inv t_inv^H is zero")
    return math.sqrt(trace)


def normalize_precoded(x_hat, t_inv) -> np.ndarray:
    return np.asarray(x_hat, dtype=complex) / precoding_divisor(t_inv)


def precoding_efficiency(t_diag) -> float:
    """Mean diagonal power over mean diagonal plus mean off-diagonal power."""
    t_diag = as_square(t_diag)
    n = t_diag.shape[0]
    if n == 1:
        return 1.0
    power = np.abs(t_diag) ** 2
    diagonal = float(np.mean(np.diagonal(power)))
    background = (float(np.sum(power)) - diagonal * n) / (n * n - n)
    total = diagonal + background
    if total == 0:
        raise MatrixException("Precoding efficiency undefined for an all-zero matrix")
    return diagonal / total


def diagonalized_chain(t_true, t_measured, alpha_rule: AlphaRule = PAPER_DEFAULT) -> np.ndarray:
    """T_true precoded with the inverse of its measurement: T_true @ tikhonov_inverse(T_measured)"""
    return as_square(t_true) @ tikhonov_inverse(t_measured, alpha_rule)


# ---------------------------
# Matrix file format
# ---------------------------
def matrix_document(m, basis: str = "LP") -> dict:
    m = as_square(m)
    data = [[float(v.real), float(v.imag)] for v in m.reshape(-1)]
    return {"n": m.shape[0], "basis": basis, "data": data}


def store_matrix(m, path: str, basis: str = "LP") -> None:
    """Writes m as JSON {n, basis, data: row-major [re, im] pairs}, atomically."""
    document = matrix_document(m, basis)
    with atomic_write(path) as file:
        json.dump(document, file)
        file.write("\n")
    logger.debug(f"Stored {document['n']}x{document['n']} matrix in {path}")


def matrix_from_document(document: dict) -> np.ndarray:
    try:
        n = int(document["n"])
        data = np.asarray(document["data"], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise MatrixException(f"Malformed matrix document: {e}")
    if n < 1 or data.shape != (n * n, 2):
        raise MatrixException(f"Matrix document data has shape {data.shape}, expected ({n * n}, 2)")
    return as_matrix((data[:, 0] + 1j * data[:, 1]).reshape(n, n))


def load_matrix(path: str) -> np.ndarray:
    """Reads a matrix written by store_matrix.

    :raises:
    MatrixException: If the file is unreadable or malformed.
    """
    try:
        with open(path, encoding="utf-8") as file:
            document = json.load(file)
    except (OSError, json.JSONDecodeError) as e:
        raise MatrixException(f"Unable to read matrix file {path}: {e}")
    return matrix_from_document(document)
