"""Column-stacking vectorization helpers for superoperators.

Conventions used throughout the package:

* ``vec`` stacks matrix columns, ``vec(rho)[i + d*j] = rho[i, j]``, so that
  ``vec(A @ rho @ B) = (B.T kron A) @ vec(rho)``.
* ``spre(A)`` is left multiplication, ``spost(B)`` right multiplication, and
  ``sandwich(A, B)`` the map ``rho -> A rho B``.
* ``dissipator(J)`` is the rate-free Lindblad form
  ``rho -> 2 J rho J+ - J+J rho - rho J+J`` (note the factor 2: a half
  linewidth ``kappa`` multiplying this dissipator gives energy decay ``2*kappa``).

All helpers accept dense ndarrays or scipy sparse matrices; sparse input gives
sparse CSR output.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

__all__ = [
    "vec",
    "unvec",
    "spre",
    "spost",
    "sandwich",
    "hamiltonian_part",
    "dissipator",
]


def vec(rho):
    """Column-stack a square matrix into a vector."""
    if sp.issparse(rho):
        rho = rho.toarray()
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def unvec(v, d=None):
    """Inverse of :func:`vec`."""
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.size)))
        if d * d != v.size:
            raise ValueError(f"cannot unvec a vector of length {v.size}")
    return v.reshape((d, d), order="F")


def _is_sparse(*ops):
    return any(sp.issparse(a) for a in ops)


def spre(a):
    """Superoperator for left multiplication, rho -> a @ rho."""
    if sp.issparse(a):
        eye = sp.identity(a.shape[0], dtype=complex, format="csr")
        return sp.kron(eye, a, format="csr")
    a = np.asarray(a, dtype=complex)
    return np.kron(np.eye(a.shape[0], dtype=complex), a)


def spost(b):
    """Superoperator for right multiplication, rho -> rho @ b."""
    if sp.issparse(b):
        eye = sp.identity(b.shape[0], dtype=complex, format="csr")
        return sp.kron(b.T, eye, format="csr")
    b = np.asarray(b, dtype=complex)
    return np.kron(b.T, np.eye(b.shape[0], dtype=complex))


def sandwich(a, b):
    """Superoperator for rho -> a @ rho @ b."""
    if _is_sparse(a, b):
        return sp.kron(sp.csr_matrix(b).T, sp.csr_matrix(a), format="csr")
    return np.kron(np.asarray(b, dtype=complex).T, np.asarray(a, dtype=complex))


def hamiltonian_part(h):
    """Coherent generator rho -> -i [h, rho] in vectorized form."""
    return -1j * (spre(h) - spost(h))


def dissipator(j):
    """Rate-free Lindblad dissipator rho -> 2 J rho J+ - {J+J, rho}."""
    if sp.issparse(j):
        jd = j.conjugate().transpose().tocsr()
    else:
        jd = np.asarray(j, dtype=complex).conj().T
    jdj = jd @ j
    return 2.0 * sandwich(j, jd) - spre(jdj) - spost(jdj)
