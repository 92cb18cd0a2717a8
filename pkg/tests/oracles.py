"""Independent reference implementations used to verify the package.

Everything here is deliberately written the slow, obvious way (dense kron
chains, scipy expm, explicit double loops) so that agreement with the
package's vectorized routines is meaningful.  Conventions match the package:
qubit 0 is the leftmost letter of a word and the most significant bit of a
state index; spin values are z = +1 for bit 0 and z = -1 for bit 1.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_MATS = {"I": _I, "X": _X, "Y": _Y, "Z": _Z}

HX = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0)
HY = np.array([[-1j, 1j], [1, 1]], dtype=complex) / np.sqrt(2.0)
HY_DAG = HY.conj().T


def word_matrix(word: str) -> np.ndarray:
    """Dense matrix of a Pauli word, leftmost letter most significant."""
    m = np.eye(1, dtype=complex)
    for ch in word:
        m = np.kron(m, PAULI_MATS[ch])
    return m


def embed_1q(gate: np.ndarray, qubit: int, n: int) -> np.ndarray:
    m = np.eye(1, dtype=complex)
    for q in range(n):
        m = np.kron(m, gate if q == qubit else _I)
    return m


def cx_matrix(control: int, target: int, n: int) -> np.ndarray:
    dim = 2**n
    m = np.zeros((dim, dim), dtype=complex)
    for j in range(dim):
        cbit = (j >> (n - 1 - control)) & 1
        k = j ^ (cbit << (n - 1 - target))
        m[k, j] = 1.0
    return m


def ham_matrix(terms: list[tuple[float, str]], n: int) -> np.ndarray:
    dim = 2**n
    m = np.zeros((dim, dim), dtype=complex)
    for coeff, word in terms:
        assert len(word) == n
        m += coeff * word_matrix(word)
    return m


def exp_factor(coeff: float, word: str) -> np.ndarray:
    """exp(-coeff * P) for a single Pauli word, via scipy expm."""
    return scipy.linalg.expm(-coeff * word_matrix(word))


def imaginary_evolved(terms: list[tuple[float, str]], n: int, tau: float,
                      psi0: np.ndarray) -> np.ndarray:
    """Normalized exp(-tau*H) psi0 by direct dense exponentiation."""
    psi = scipy.linalg.expm(-tau * ham_matrix(terms, n)) @ psi0
    return psi / np.linalg.norm(psi)


def tfim_terms(n: int = 3) -> list[tuple[float, str]]:
    """Critical transverse-field Ising chain with periodic boundaries."""
    terms: list[tuple[float, str]] = []
    for i in range(n):
        word = ["I"] * n
        word[i] = "Z"
        word[(i + 1) % n] = "Z"
        terms.append((1.0, "".join(word)))
    for i in range(n):
        word = ["I"] * n
        word[i] = "X"
        terms.append((-1.0, "".join(word)))
    return terms


def ldbm_amplitudes_bruteforce(n_visible: int, a, b, w, lat,
                               log_norm: complex) -> np.ndarray:
    """Amplitude vector of a lateral-coupled network by explicit double loop.

    a: (N,), b: (M,), w: (N, M), lat: (M, M) strictly upper triangular.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    w = np.asarray(w, dtype=complex).reshape(n_visible, -1)
    m = b.size
    lat = np.asarray(lat, dtype=complex).reshape(m, m)
    amps = np.zeros(2**n_visible, dtype=complex)
    for zi in range(2**n_visible):
        z = np.array([1 - 2 * ((zi >> (n_visible - 1 - q)) & 1)
                      for q in range(n_visible)], dtype=float)
        total = 0.0 + 0.0j
        for hi in range(2**m):
            h = np.array([1 - 2 * ((hi >> j) & 1) for j in range(m)],
                         dtype=float)
            expo = np.dot(a, z) + z @ w @ h + np.dot(b, h)
            for j in range(m):
                for k in range(j + 1, m):
                    expo = expo + h[j] * lat[j, k] * h[k]
            total += np.exp(1j * expo)
        amps[zi] = np.exp(log_norm) * total
    return amps


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return psi / np.linalg.norm(psi)


def fidelity(u: np.ndarray, v: np.ndarray) -> float:
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)
    return abs(np.vdot(u, v)) ** 2
