"""Brute-force reference computations, written without the package's helpers.

Register convention under test: qubit k is bit k of the basis index, so a
product of single-qubit vectors v0, v1, ... is ``kron(..., v1, v0)``.
"""
import itertools
import math

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
S = 1 / math.sqrt(2)

UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)
H, V = UP, DOWN
RIGHT = (UP + DOWN) * S
LEFT = (UP - DOWN) * S
SIGMA_PLUS = (H + 1j * V) * S
SIGMA_MINUS = (H - 1j * V) * S


def reg(*vecs):
    """Product vector with ``vecs[k]`` on qubit k."""
    out = np.array([1.0 + 0j])
    for v in vecs:
        out = np.kron(v, out)
    return out


def reg_op(*ops):
    out = np.array([[1.0 + 0j]])
    for o in ops:
        out = np.kron(o, out)
    return out


def bell(name):
    return {
        "PhiPlus": (reg(UP, UP) + reg(DOWN, DOWN)) * S,
        "PhiMinus": (reg(UP, UP) - reg(DOWN, DOWN)) * S,
        "PsiPlus": (reg(UP, DOWN) + reg(DOWN, UP)) * S,
        "PsiMinus": (reg(UP, DOWN) - reg(DOWN, UP)) * S,
    }[name]


def dm(v):
    return np.outer(v, v.conj())


def partial_trace(rho, keep, n):
    """Reduced matrix by explicit summation over the traced bits."""
    keep = sorted(keep)
    gone = [q for q in range(n) if q not in keep]
    dk = 2 ** len(keep)
    out = np.zeros((dk, dk), dtype=complex)

    def index(kbits, gbits):
        i = 0
        for q, b in zip(keep, kbits):
            i |= b << q
        for q, b in zip(gone, gbits):
            i |= b << q
        return i

    for a in itertools.product((0, 1), repeat=len(keep)):
        ia = sum(b << k for k, b in enumerate(a))
        for c in itertools.product((0, 1), repeat=len(keep)):
            ic = sum(b << k for k, b in enumerate(c))
            for g in itertools.product((0, 1), repeat=len(gone)):
                out[ia, ic] += rho[index(a, g), index(c, g)]
    return out


def project_photons_psi_minus(rho_a, rho_b, photon_bell="PsiMinus"):
    """Qubits (memA, photA, memB, photB): project photons, keep memories (A low bit)."""
    joint = np.kron(rho_b, rho_a)
    psi = bell(photon_bell)
    basis = [UP, DOWN]
    w = np.zeros((16, 4), dtype=complex)
    for a, b in itertools.product((0, 1), repeat=2):
        col = np.zeros(16, dtype=complex)
        for c, d in itertools.product((0, 1), repeat=2):
            amp = psi[c + 2 * d]
            if amp != 0:
                col += amp * reg(basis[a], basis[c], basis[b], basis[d])
        w[:, a + 2 * b] = col
    sigma = w.conj().T @ joint @ w
    p = float(np.trace(sigma).real)
    return p, (sigma / p if p > 1e-14 else None)


def cnot(control, target, n):
    d = 2**n
    u = np.zeros((d, d))
    for i in range(d):
        j = i ^ (1 << target) if (i >> control) & 1 else i
        u[j, i] = 1
    return u


def bbpssw(rho1, rho2, target="PhiPlus"):
    """Pairs (q0,q1) and (q2,q3); CNOTs 0->2 and 1->3; keep when q2 == q3."""
    joint = np.kron(rho2, rho1)
    u = cnot(0, 2, 4) @ cnot(1, 3, 4)
    joint = u @ joint @ u.conj().T
    out = np.zeros((4, 4), dtype=complex)
    for b in (0, 1):
        proj = reg_op(I2, I2, dm(np.eye(2)[b]), dm(np.eye(2)[b]))
        out += partial_trace(proj @ joint @ proj, [0, 1], 4)
    p = float(np.trace(out).real)
    f = float(np.real(bell(target).conj() @ out @ bell(target))) / p
    return p, f


def swap_average_fidelity(rho_ab, rho_bc, target="PhiPlus"):
    """Bell-measure the middle qubits, correct each outcome by its Pauli, average."""
    joint = np.kron(rho_bc, rho_ab)  # qubits A, B1, B2, C
    corrections = {"PhiPlus": I2, "PsiPlus": X, "PsiMinus": X @ Z, "PhiMinus": Z}
    fid = 0.0
    for name, corr in corrections.items():
        v = bell(name)
        w = np.zeros((16, 4), dtype=complex)
        for a, c in itertools.product((0, 1), repeat=2):
            col = np.zeros(16, dtype=complex)
            for b1, b2 in itertools.product((0, 1), repeat=2):
                col += v[b1 + 2 * b2] * reg(np.eye(2)[a], np.eye(2)[b1], np.eye(2)[b2], np.eye(2)[c])
            w[:, a + 2 * c] = col
        sigma = w.conj().T @ joint @ w
        fix = reg_op(I2, corr)
        sigma = fix @ sigma @ fix.conj().T
        fid += float(np.real(bell(target).conj() @ sigma @ bell(target)))
    return fid


def herald_probabilities(qa, qb, xa, xb, p_minus, p_plus, dark, resolving):
    """Exact (P[herald], P[genuine herald]) by enumerating every discrete event.

    qa, qb: arrival probabilities; xa, xb: extra-photon probabilities;
    p_minus, p_plus: coincidence probabilities given both photons arrive.
    """
    total = genuine = 0.0
    for a, b, ea, eb in itertools.product((0, 1), repeat=4):
        w = (qa if a else 1 - qa) * (qb if b else 1 - qb) * (xa if ea else 1 - xa) * (xb if eb else 1 - xb)
        if w == 0:
            continue
        if a and b:
            pair_cases = [((1, 1), p_minus + p_plus, True), ((2, 0), (1 - p_minus - p_plus) / 2, False),
                          ((0, 2), (1 - p_minus - p_plus) / 2, False)]
        elif a or b:
            pair_cases = [((1, 0), 0.5, False), ((0, 1), 0.5, False)]
        else:
            pair_cases = [((0, 0), 1.0, False)]
        extras = [s for s, on in ((0, ea), (1, eb)) if on]
        for (c0, c1), wp, coinc in pair_cases:
            for sides in itertools.product((0, 1), repeat=len(extras)):
                ws = 0.5 ** len(extras)
                n0 = c0 + sum(1 for s in sides if s == 0)
                n1 = c1 + sum(1 for s in sides if s == 1)
                for d0, d1 in itertools.product((0, 1), repeat=2):
                    wd = (dark if d0 else 1 - dark) * (dark if d1 else 1 - dark)
                    m0, m1 = n0 + d0, n1 + d1
                    ok = (m0 == 1 and m1 == 1) if resolving else (m0 >= 1 and m1 >= 1)
                    if ok:
                        pw = w * wp * ws * wd
                        total += pw
                        if coinc and not ea and not eb:
                            genuine += pw
    return total, genuine
