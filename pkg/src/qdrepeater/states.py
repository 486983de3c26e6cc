"""Small dense density-operator algebra for qubit registers.

Register convention is little-endian: qubit ``k`` is bit ``k`` of the basis
index, so qubit 0 is the least significant.  ``tensor_product(a, b)`` places
the qubits of ``a`` at the low indices and those of ``b`` above them, and a
multi-qubit amplitude vector written over an ordered list of qubits
``(q0, q1, ...)`` uses index ``b0 + 2*b1 + ...``.

Spin and photon labels map onto the computational basis as
``|up> = |H> = |0>`` and ``|down> = |V> = |1>``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 6

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-9
PSD_TOL = -1e-9
NORM_TOL = 1e-10

SQRT1_2 = 1.0 / np.sqrt(2.0)

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# Single-qubit measurement bases as (outcome 0, outcome 1) column vectors.
# Outcome 0 is always the +1 eigenvector of the matching Pauli operator.
BASES = {
    "Z": (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)),
    "X": (np.array([1, 1], dtype=complex) * SQRT1_2, np.array([1, -1], dtype=complex) * SQRT1_2),
    "Y": (np.array([1, 1j], dtype=complex) * SQRT1_2, np.array([1, -1j], dtype=complex) * SQRT1_2),
}


class RegisterSizeError(ValueError):
    """Raised when a register would exceed ``MAX_QUBITS``."""


class BellKind(enum.Enum):
    PHI_PLUS = "PhiPlus"
    PHI_MINUS = "PhiMinus"
    PSI_PLUS = "PsiPlus"
    PSI_MINUS = "PsiMinus"


def _n_qubits(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit-norm state vector with canonical global phase."""

    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).reshape(-1).copy()
        _n_qubits(v.size)
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {norm} deviates from 1")
        nz = np.flatnonzero(np.abs(v) > 1e-12)
        if nz.size:
            lead = abs(v[nz[0]])
            v *= np.exp(-1j * np.angle(v[nz[0]]))
            v[nz[0]] = lead
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @classmethod
    def normalized(cls, amplitudes) -> "PureState":
        v = np.asarray(amplitudes, dtype=complex).reshape(-1)
        return cls(v / np.linalg.norm(v))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def n_qubits(self) -> int:
        return _n_qubits(self.dim)

    def density(self) -> "DensityOperator":
        v = self.amplitudes
        return DensityOperator(np.outer(v, v.conj()))

    def __eq__(self, other):
        if not isinstance(other, PureState):
            return NotImplemented
        return self.dim == other.dim and np.allclose(self.amplitudes, other.amplitudes, atol=NORM_TOL)

    def __hash__(self):
        return hash(np.round(self.amplitudes, 9).tobytes())


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Density matrix over ``n_qubits`` qubits.

    Construction validates Hermiticity, unit trace and positivity unless
    ``validate=False``, which is reserved for estimates that may be
    unphysical (direct tomographic inversion).  Use :meth:`is_physical` to
    inspect such objects.
    """

    matrix: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {m.shape}")
        n = _n_qubits(m.shape[0])
        if n > MAX_QUBITS:
            raise RegisterSizeError(f"{n} qubits exceeds register limit {MAX_QUBITS}")
        if self.validate:
            _check_physical(m)
            # symmetrize away round-off so downstream eigvalsh sees an exact Hermitian
            m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return _n_qubits(self.dim)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues()[0])

    def is_physical(self) -> bool:
        try:
            _check_physical(self.matrix)
        except ValueError:
            return False
        return True

    def to_json(self) -> list:
        """Row-major ``[re, im]`` pairs."""
        return [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix]

    @classmethod
    def from_json(cls, rows, validate: bool = True) -> "DensityOperator":
        m = np.array([[complex(re, im) for re, im in row] for row in rows])
        return cls(m, validate=validate)

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityOperator":
        d = 2**n_qubits
        return cls(np.eye(d, dtype=complex) / d)

    @classmethod
    def basis(cls, bits: Sequence[int]) -> "DensityOperator":
        """Computational basis projector, ``bits[k]`` being the value of qubit ``k``."""
        idx = sum(int(b) << k for k, b in enumerate(bits))
        d = 2 ** len(bits)
        m = np.zeros((d, d), dtype=complex)
        m[idx, idx] = 1.0
        return cls(m)


def _check_physical(m: np.ndarray) -> None:
    herm_err = np.max(np.abs(m - m.conj().T))
    if herm_err > HERMITIAN_TOL:
        raise ValueError(f"matrix is not Hermitian (max deviation {herm_err:.3g})")
    tr = np.trace(m).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"trace {tr!r} deviates from 1")
    lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
    if lam < PSD_TOL:
        raise ValueError(f"matrix is not positive semi-definite (min eigenvalue {lam:.3g})")


def as_density(state) -> DensityOperator:
    if isinstance(state, DensityOperator):
        return state
    if isinstance(state, PureState):
        return state.density()
    raise TypeError(f"expected DensityOperator or PureState, got {type(state).__name__}")


# ---------------------------------------------------------------------------
# tensor-index helpers


def kron_qubits(ops: Sequence[np.ndarray]) -> np.ndarray:
    """Operator with ``ops[k]`` acting on qubit ``k``."""
    return reduce(np.kron, list(reversed(list(ops))))


def kron_vectors(vecs: Sequence[np.ndarray]) -> np.ndarray:
    """Product vector with ``vecs[k]`` on qubit ``k``."""
    return reduce(np.kron, list(reversed(list(vecs))))


def _letters(n: int) -> str:
    return "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"[:n]


def _check_qubits(qubits: Iterable[int], n: int) -> list[int]:
    qs = [int(q) for q in qubits]
    if len(set(qs)) != len(qs):
        raise ValueError(f"repeated qubit index in {qs}")
    for q in qs:
        if not 0 <= q < n:
            raise ValueError(f"qubit index {q} out of range for {n}-qubit register")
    return qs


def _contract(m: np.ndarray, n: int, qubits: Sequence[int], vec: np.ndarray) -> np.ndarray:
    """Return ``<v| rho |v>`` on ``qubits``, leaving the rest (unnormalized).

    ``vec`` is little-endian over ``qubits`` in the order given.  Remaining
    qubits keep their relative order.
    """
    k = len(qubits)
    rows = _letters(n)
    cols = _letters(2 * n)[n:]
    # axis i of the row tensor belongs to qubit n-1-i
    rlab = [rows[n - 1 - q] for q in range(n)]
    clab = [cols[n - 1 - q] for q in range(n)]
    v = np.asarray(vec, dtype=complex).reshape((2,) * k)  # axis j -> qubits[k-1-j]
    vr = "".join(rlab[qubits[k - 1 - j]] for j in range(k))
    vc = "".join(clab[qubits[k - 1 - j]] for j in range(k))
    keep = [q for q in range(n) if q not in qubits]
    out = "".join(rlab[q] for q in reversed(keep)) + "".join(clab[q] for q in reversed(keep))
    spec = f"{''.join(rows)}{''.join(cols)},{vr},{vc}->{out}"
    t = np.einsum(spec, m.reshape((2,) * (2 * n)), v.conj(), v)
    d = 2 ** len(keep)
    return t.reshape(d, d)


def _apply_1q(m: np.ndarray, n: int, qubit: int, u: np.ndarray) -> np.ndarray:
    t = m.reshape((2,) * (2 * n))
    ra, ca = n - 1 - qubit, 2 * n - 1 - qubit
    t = np.moveaxis(np.tensordot(u, t, axes=(1, ra)), 0, ra)
    t = np.moveaxis(np.tensordot(u.conj(), t, axes=(1, ca)), 0, ca)
    return t.reshape(m.shape)


# ---------------------------------------------------------------------------
# operations


def tensor_product(a, b, max_qubits: int = MAX_QUBITS) -> DensityOperator:
    a, b = as_density(a), as_density(b)
    n = a.n_qubits + b.n_qubits
    if n > max_qubits:
        raise RegisterSizeError(f"{n} qubits exceeds register limit {max_qubits}")
    return DensityOperator(np.kron(b.matrix, a.matrix))


def pure_tensor(a: PureState, b: PureState) -> PureState:
    return PureState(np.kron(b.amplitudes, a.amplitudes))


def partial_trace(rho, keep: Iterable[int]) -> DensityOperator:
    """Reduced state on ``keep``; kept qubits are renumbered in ascending order."""
    rho = as_density(rho)
    n = rho.n_qubits
    keep = sorted(_check_qubits(keep, n))
    if not keep:
        raise ValueError("keep set must be nonempty")
    rows = _letters(n)
    cols = list(_letters(2 * n)[n:])
    for q in range(n):
        if q not in keep:
            cols[n - 1 - q] = rows[n - 1 - q]
    out = "".join(rows[n - 1 - q] for q in reversed(keep)) + "".join(cols[n - 1 - q] for q in reversed(keep))
    t = np.einsum(f"{rows}{''.join(cols)}->{out}", rho.matrix.reshape((2,) * (2 * n)))
    d = 2 ** len(keep)
    return DensityOperator(t.reshape(d, d))


def permute_qubits(rho, order: Sequence[int]) -> DensityOperator:
    """New register whose qubit ``k`` is old qubit ``order[k]``."""
    rho = as_density(rho)
    n = rho.n_qubits
    order = _check_qubits(order, n)
    if len(order) != n:
        raise ValueError("order must list every qubit once")
    t = rho.matrix.reshape((2,) * (2 * n))
    # new axis for new qubit k (row) is n-1-k, sourced from old axis n-1-order[k]
    src = [n - 1 - order[n - 1 - i] for i in range(n)]
    t = np.transpose(t, src + [n + s for s in src])
    return DensityOperator(t.reshape(rho.dim, rho.dim))


def bell_state(kind: BellKind) -> PureState:
    s = SQRT1_2
    amps = {
        BellKind.PHI_PLUS: (s, 0, 0, s),
        BellKind.PHI_MINUS: (s, 0, 0, -s),
        BellKind.PSI_PLUS: (0, s, s, 0),
        BellKind.PSI_MINUS: (0, s, -s, 0),
    }[BellKind(kind)]
    return PureState(np.array(amps, dtype=complex))


BELL_ORDER = (BellKind.PHI_PLUS, BellKind.PHI_MINUS, BellKind.PSI_PLUS, BellKind.PSI_MINUS)


def bell_pair_coefficients(state: PureState, pair_1: Sequence[int] = (0, 2), pair_2: Sequence[int] = (1, 3)) -> np.ndarray:
    """Amplitudes of a 4-qubit state in the Bell(pair_1) x Bell(pair_2) basis.

    ``c[i, j]`` is the overlap with ``BELL_ORDER[i]`` on ``pair_1`` times
    ``BELL_ORDER[j]`` on ``pair_2``; each pair is (low qubit, high qubit).
    """
    if state.n_qubits != 4:
        raise ValueError("expected a 4-qubit state")
    q = list(pair_1) + list(pair_2)
    _check_qubits(q, 4)
    if sorted(q) != [0, 1, 2, 3]:
        raise ValueError("pairs must partition the four qubits")
    t = state.amplitudes.reshape((2,) * 4)  # axis a holds qubit 3 - a
    m = np.transpose(t, [3 - pair_1[1], 3 - pair_1[0], 3 - pair_2[1], 3 - pair_2[0]]).reshape(4, 4)
    b = np.array([bell_state(k).amplitudes for k in BELL_ORDER]).conj()
    return b @ m @ b.T


def werner_state(fidelity: float, kind: BellKind = BellKind.PHI_PLUS) -> DensityOperator:
    """``F |B><B| + (1-F)/3 (I - |B><B|)`` for Bell state ``B``."""
    if not 0.0 <= fidelity <= 1.0:
        raise ValueError(f"fidelity {fidelity} outside [0, 1]")
    p = bell_state(kind).density().matrix
    return DensityOperator(fidelity * p + (1.0 - fidelity) / 3.0 * (np.eye(4) - p))


def classical_mixture() -> DensityOperator:
    """Equal mixture of ``|up up>`` and ``|down down>``."""
    return DensityOperator(np.diag([0.5, 0, 0, 0.5]).astype(complex))


def fidelity_pure_target(rho, target: PureState) -> float:
    rho = as_density(rho)
    if rho.dim != target.dim:
        raise ValueError(f"dimension mismatch: rho {rho.dim}, target {target.dim}")
    v = target.amplitudes
    f = float(np.real(v.conj() @ rho.matrix @ v))
    return min(max(f, 0.0), 1.0)


def pauli_operator(labels: str | Sequence[str]) -> np.ndarray:
    """Pauli string with ``labels[k]`` acting on qubit ``k``."""
    try:
        return kron_qubits([PAULI[c] for c in labels])
    except KeyError as exc:
        raise ValueError(f"unknown Pauli label {exc.args[0]!r}") from None


def pauli_expectation(rho, labels: str | Sequence[str]) -> float:
    rho = as_density(rho)
    if len(labels) != rho.n_qubits:
        raise ValueError(f"{len(labels)} Pauli labels for a {rho.n_qubits}-qubit state")
    return float(np.real(np.trace(rho.matrix @ pauli_operator(labels))))


def apply_unitary_1q(rho, qubit: int, u: np.ndarray) -> DensityOperator:
    rho = as_density(rho)
    _check_qubits([qubit], rho.n_qubits)
    return DensityOperator(_apply_1q(rho.matrix, rho.n_qubits, qubit, np.asarray(u, dtype=complex)))


def apply_unitary(rho, u: np.ndarray) -> DensityOperator:
    rho = as_density(rho)
    return DensityOperator(u @ rho.matrix @ u.conj().T)


def apply_dephasing(rho, qubit: int, strength: float) -> DensityOperator:
    """Scale coherences between the Z eigenstates of ``qubit`` by ``1 - strength``."""
    rho = as_density(rho)
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"dephasing strength {strength} outside [0, 1]")
    _check_qubits([qubit], rho.n_qubits)
    bit = (np.arange(rho.dim) >> qubit) & 1
    m = np.array(rho.matrix)
    m[bit[:, None] != bit[None, :]] *= 1.0 - strength
    return DensityOperator(m)


def apply_depolarizing(rho, prob: float) -> DensityOperator:
    """Global depolarization ``(1-p) rho + p I/d``."""
    rho = as_density(rho)
    if not 0.0 <= prob <= 1.0:
        raise ValueError(f"depolarizing probability {prob} outside [0, 1]")
    return DensityOperator((1.0 - prob) * rho.matrix + prob * np.eye(rho.dim) / rho.dim)


def mix(states_and_weights: Iterable[tuple[DensityOperator, float]]) -> DensityOperator:
    acc = None
    for s, w in states_and_weights:
        term = w * as_density(s).matrix
        acc = term if acc is None else acc + term
    return DensityOperator(acc)


def check_basis(basis) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(basis, str):
        try:
            return BASES[basis]
        except KeyError:
            raise ValueError(f"unknown basis label {basis!r}") from None
    u0, u1 = (np.asarray(v, dtype=complex).reshape(2) for v in basis)
    gram = np.array([[np.vdot(u0, u0), np.vdot(u0, u1)], [np.vdot(u1, u0), np.vdot(u1, u1)]])
    if np.max(np.abs(gram - np.eye(2))) > NORM_TOL:
        raise ValueError("basis vectors are not orthonormal")
    return u0, u1


def basis_unitary(basis) -> np.ndarray:
    """Unitary whose rows are the conjugated basis vectors: maps ``|u_j>`` to ``|j>``."""
    u0, u1 = check_basis(basis)
    return np.vstack([u0.conj(), u1.conj()])


@dataclass(frozen=True)
class MeasurementResult:
    probs: tuple[float, float]
    post_states: tuple[DensityOperator | None, DensityOperator | None]


def projective_measure_probs(rho, qubit: int, basis) -> MeasurementResult:
    """Outcome probabilities and renormalized post-measurement states.

    A branch with zero probability has post-state ``None``.
    """
    rho = as_density(rho)
    n = rho.n_qubits
    _check_qubits([qubit], n)
    probs, posts = [], []
    for u in check_basis(basis):
        proj = np.outer(u, u.conj())
        m = _apply_1q(rho.matrix, n, qubit, proj)
        p = float(np.trace(m).real)
        probs.append(max(p, 0.0))
        posts.append(DensityOperator(m / p) if p > 1e-14 else None)
    return MeasurementResult(tuple(probs), tuple(posts))


def joint_outcome_probs(rho, bases: Sequence) -> np.ndarray:
    """Born-rule probabilities ``P[o_0, o_1, ...]`` for local basis measurements.

    ``bases[k]`` is measured on qubit ``k``; the returned array is indexed
    ``probs[o_0, o_1, ...]``.
    """
    rho = as_density(rho)
    n = rho.n_qubits
    if len(bases) != n:
        raise ValueError("one basis per qubit required")
    u = kron_qubits([basis_unitary(b) for b in bases])
    diag = np.real(np.einsum("ij,jk,ik->i", u, rho.matrix, u.conj()))
    # index i = sum o_k 2^k; reshape gives axes ordered o_{n-1} ... o_0
    p = np.clip(diag, 0.0, None).reshape((2,) * n)
    return np.transpose(p, list(range(n))[::-1])


def project_pure(rho, qubits: Sequence[int], vec) -> tuple[float, DensityOperator | None]:
    """Project ``qubits`` onto ``vec`` and trace them out.

    Returns the projection probability and the normalized state of the
    remaining qubits (``None`` if the probability vanishes).
    """
    rho = as_density(rho)
    qubits = _check_qubits(qubits, rho.n_qubits)
    if isinstance(vec, PureState):
        vec = vec.amplitudes
    m = _contract(rho.matrix, rho.n_qubits, qubits, vec)
    p = float(np.trace(m).real)
    if p <= 1e-14:
        return 0.0, None
    return p, DensityOperator(m / p)


def random_density(n_qubits: int, rng: np.random.Generator, rank: int | None = None) -> DensityOperator:
    """Random state from a complex Ginibre matrix (Hilbert-Schmidt measure for full rank)."""
    d = 2**n_qubits
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    m = g @ g.conj().T
    return DensityOperator(m / np.trace(m).real)


def random_pure(n_qubits: int, rng: np.random.Generator) -> PureState:
    d = 2**n_qubits
    return PureState.normalized(rng.normal(size=d) + 1j * rng.normal(size=d))


def trace_distance(a, b) -> float:
    a, b = as_density(a), as_density(b)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a.matrix - b.matrix))))


# ---------------------------------------------------------------------------
# Bell-frame bookkeeping for two-qubit pairs

_FRAME_PAULIS = ("I", "X", "Y", "Z")


@lru_cache(maxsize=None)
def frame_pauli(source: BellKind, target: BellKind) -> str:
    """Pauli label on the second qubit mapping Bell state ``source`` to ``target``."""
    src = bell_state(source).amplitudes
    tgt = bell_state(target).amplitudes
    for lab in _FRAME_PAULIS:
        op = kron_qubits([PAULI["I"], PAULI[lab]])
        if abs(abs(np.vdot(tgt, op @ src)) - 1.0) < 1e-9:
            return lab
    raise AssertionError("Bell states are not Pauli-related")  # unreachable


def align_frame(rho, source: BellKind, target: BellKind) -> DensityOperator:
    """Apply the Pauli correction taking ``source`` frame to ``target`` on qubit 1."""
    return apply_unitary_1q(rho, 1, PAULI[frame_pauli(BellKind(source), BellKind(target))])


def closest_bell(rho) -> tuple[BellKind, float]:
    rho = as_density(rho)
    best = max(BellKind, key=lambda k: fidelity_pure_target(rho, bell_state(k)))
    return best, fidelity_pure_target(rho, bell_state(best))
