"""Dense statevector execution with mid-circuit measurement and reset.

Exact mode deterministically post-selects every measurement (recording each
branch probability); sampled mode draws Born-rule outcomes for a whole batch
of shots at once, discarding shots at their first failed post-selection.
Randomness comes from a counter-based Philox generator keyed by the seed; at
each measurement event one variate is drawn per surviving shot in shot
order, and terminal sampling draws one variate per surviving shot, so a
given (circuit, state, n_shots, seed) is bit-reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .ir import Circuit, Gate
from .pauli import HX, HY, HY_DAG, Hamiltonian, PauliString, apply_word, dense_matrix, word_action

_GATE_1Q = {"hx": HX, "hy": HY, "hydag": HY_DAG}

#: Branch probabilities below this are treated as a fully rejected trajectory.
ZERO_WEIGHT = 1e-300

#: Post-selected branch weights below this (amplitude ~1e-12 out of a
#: unit-norm state) are indistinguishable from roundoff noise in double
#: precision, so exact execution refuses to renormalize through them.
BRANCH_FLOOR = 1e-24


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class StateVector:
    """Amplitudes over computational basis states, qubit 0 most significant."""

    n_qubits: int
    amps: np.ndarray

    def __post_init__(self) -> None:
        amps = np.asarray(self.amps, dtype=complex)
        if amps.shape != (1 << self.n_qubits,):
            raise ValueError(
                f"expected {1 << self.n_qubits} amplitudes, got shape {amps.shape}"
            )
        object.__setattr__(self, "amps", amps)

    @classmethod
    def zeros(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def from_bitstring(cls, bits: str) -> "StateVector":
        n = len(bits)
        amps = np.zeros(1 << n, dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(n, amps)

    @classmethod
    def uniform_plus(cls, n_qubits: int) -> "StateVector":
        dim = 1 << n_qubits
        return cls(n_qubits, np.full(dim, 1.0 / np.sqrt(dim), dtype=complex))

    @classmethod
    def from_amplitudes(cls, values) -> "StateVector":
        amps = np.asarray(values, dtype=complex)
        n = int(np.log2(amps.size))
        return cls(n, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalized(self) -> "StateVector":
        n = self.norm
        if n < ZERO_WEIGHT:
            raise SimulationError("cannot normalize a zero state")
        return StateVector(self.n_qubits, self.amps / n)

    def inner(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amps, other.amps))

    def fidelity(self, other: "StateVector") -> float:
        return abs(self.normalized().inner(other.normalized())) ** 2


@dataclass(frozen=True)
class ExactRunResult:
    """Post-selected final state and the product of branch probabilities."""

    final_state: StateVector
    cumulative_success: float
    log_norm: float


# ---------------------------------------------------------------------------
# Gate kernels over (batch, 2^n) amplitude arrays.

@lru_cache(maxsize=1024)
def _cx_perm(n: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(1 << n)
    cbit = (idx >> (n - 1 - control)) & 1
    perm = np.where(cbit == 1, idx ^ (1 << (n - 1 - target)), idx)
    perm.setflags(write=False)
    return perm


def _apply_1q(amps: np.ndarray, n: int, q: int, mat: np.ndarray) -> None:
    shaped = amps.reshape(amps.shape[0], 1 << q, 2, -1)
    a0 = shaped[:, :, 0, :].copy()
    a1 = shaped[:, :, 1, :]
    shaped[:, :, 0, :] = mat[0, 0] * a0 + mat[0, 1] * a1
    shaped[:, :, 1, :] = mat[1, 0] * a0 + mat[1, 1] * a1


def _apply_rot(amps: np.ndarray, string: PauliString, angle: float) -> None:
    perm, phase = word_action(string.word)
    tmp = amps[:, perm] * phase
    amps *= np.cos(0.5 * angle)
    tmp *= -1j * np.sin(0.5 * angle)
    amps += tmp


def _apply_unitary(amps: np.ndarray, n: int, g: Gate) -> None:
    if g.kind in _GATE_1Q:
        _apply_1q(amps, n, g.qubits[0], _GATE_1Q[g.kind])
    elif g.kind == "cx":
        amps[:] = amps[:, _cx_perm(n, g.qubits[0], g.qubits[1])]
    elif g.kind == "pauli_rot":
        _apply_rot(amps, g.string, g.angle)
    else:
        raise SimulationError(f"gate {g.kind!r} is not unitary")


def _outcome_probs(amps: np.ndarray, n: int, q: int) -> np.ndarray:
    """Per-row probability of measuring 1 on qubit q (rows assumed normalized)."""
    shaped = amps.reshape(amps.shape[0], 1 << q, 2, -1)
    return np.sum(np.abs(shaped[:, :, 1, :]) ** 2, axis=(1, 2))


def _embed(circuit: Circuit, psi0: StateVector) -> np.ndarray:
    if psi0.n_qubits != circuit.n_visible:
        raise ValueError(
            f"initial state has {psi0.n_qubits} qubits, circuit expects "
            f"{circuit.n_visible} visible qubits"
        )
    vec = psi0.normalized().amps
    if circuit.n_ancilla == 0:
        return vec.copy()
    anc = np.zeros(1 << circuit.n_ancilla, dtype=complex)
    anc[0] = 1.0
    return np.kron(vec, anc)  # ancillas occupy the least significant bits


def _reset_vector(vec: np.ndarray, n: int, q: int) -> np.ndarray:
    """Factor a disentangled qubit out of a single state and reinitialize to |0>.

    The qubit must be in a product state with the rest (verified to 1e-10);
    the returned vector keeps the input norm.  When the qubit held a
    superposition the result carries the phase of its |0> component.
    """
    shaped = vec.reshape(1 << q, 2, -1)
    psi0 = shaped[:, 0, :].reshape(-1)
    psi1 = shaped[:, 1, :].reshape(-1)
    n0 = float(np.vdot(psi0, psi0).real)
    n1 = float(np.vdot(psi1, psi1).real)
    total = n0 + n1
    if total < ZERO_WEIGHT:
        raise SimulationError("reset applied to a zero state")
    if n1 <= 1e-20 * total:
        base, base_norm = psi0, n0
    elif n0 <= 1e-20 * total:
        base, base_norm = psi1, n1
    else:
        coef = np.vdot(psi0, psi1) / n0
        resid = float(np.linalg.norm(psi1 - coef * psi0))
        if resid > 1e-10 * np.sqrt(total):
            raise SimulationError(f"reset on entangled qubit {q} (residual {resid:.3g})")
        base, base_norm = psi0, n0
    out = np.zeros_like(vec).reshape(1 << q, 2, -1)
    out[:, 0, :] = (base * np.sqrt(total / base_norm)).reshape(1 << q, -1)
    return out.reshape(-1)


def run_exact(circuit: Circuit, psi0: StateVector) -> ExactRunResult:
    """Deterministic execution: every measurement projects onto its
    post-selected outcome and the branch probability is recorded.

    Requires each measure gate to be immediately followed by the postselect
    consuming its bit (all circuits built by this package satisfy that).
    Returns the renormalized visible-register state; ancillas must end in
    |0> (guaranteed after their final reset).
    """
    n = circuit.n_qubits
    amps = _embed(circuit, psi0)[None, :]
    cumulative = 1.0
    gates = circuit.gates
    i = 0
    while i < len(gates):
        g = gates[i]
        if g.kind == "measure":
            if i + 1 >= len(gates) or gates[i + 1].kind != "postselect" \
                    or gates[i + 1].cbit != g.cbit:
                raise SimulationError(
                    "exact mode requires measure to be immediately followed by "
                    "its postselect"
                )
            value = gates[i + 1].value
            q = g.qubits[0]
            shaped = amps.reshape(1, 1 << q, 2, -1)
            # Weigh the kept branch directly: 1 - p(other) would fold the
            # state's accumulated norm error into p, and dividing by a tiny
            # p amplifies that error multiplicatively across units.
            p = float(np.sum(np.abs(shaped[:, :, value, :]) ** 2))
            if p < BRANCH_FLOOR:
                raise SimulationError(
                    f"zero-weight trajectory: postselect on cbit {g.cbit} has "
                    f"branch probability {p:.3g}"
                )
            shaped[:, :, 1 - value, :] = 0.0
            amps /= np.sqrt(p)
            cumulative *= p
            i += 2
            continue
        if g.kind == "postselect":
            raise SimulationError("postselect without a preceding measure")
        if g.kind == "reset":
            amps = _reset_vector(amps[0], n, g.qubits[0])[None, :]
        else:
            _apply_unitary(amps, n, g)
        i += 1
    full = amps[0]
    if circuit.n_ancilla:
        block = full.reshape(1 << circuit.n_visible, 1 << circuit.n_ancilla)
        visible = block[:, 0]
        leak = 1.0 - float(np.vdot(visible, visible).real)
        if leak > 1e-9:
            raise SimulationError(f"ancillas not returned to |0> (weight {leak:.3g})")
    else:
        visible = full
    return ExactRunResult(
        final_state=StateVector(circuit.n_visible, visible).normalized(),
        cumulative_success=cumulative,
        log_norm=circuit.log_norm,
    )


@dataclass(frozen=True)
class ShotOutcome:
    """One shot: acceptance flag, classical bits, terminal sample."""

    accepted: bool
    classical_bits: tuple[int, ...]
    terminal_bits: tuple[int, ...] | None


class ShotRun(Sequence[ShotOutcome]):
    """Array-backed sequence of per-shot outcomes.

    classical bits hold -1 where a shot was rejected before the measurement;
    terminal bits are per visible qubit in the run's measurement basis.
    """

    def __init__(self, basis: str, accepted: np.ndarray, cbits: np.ndarray,
                 terminal: np.ndarray) -> None:
        self.basis = basis
        self.accepted = accepted
        self.cbits = cbits
        self.terminal = terminal

    @property
    def n_shots(self) -> int:
        return self.accepted.size

    @property
    def n_accepted(self) -> int:
        return int(np.sum(self.accepted))

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_shots if self.n_shots else 0.0

    def __len__(self) -> int:
        return self.accepted.size

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        ok = bool(self.accepted[index])
        return ShotOutcome(
            accepted=ok,
            classical_bits=tuple(int(b) for b in self.cbits[index]),
            terminal_bits=tuple(int(b) for b in self.terminal[index]) if ok else None,
        )

    def __iter__(self) -> Iterator[ShotOutcome]:
        return (self[i] for i in range(len(self)))

    def word_values(self, word: str | PauliString) -> np.ndarray:
        """Per-accepted-shot eigenvalues of a word compatible with the basis."""
        word = word.word if isinstance(word, PauliString) else word
        if len(word) != self.terminal.shape[1]:
            raise ValueError(f"word {word!r} does not match {self.terminal.shape[1]} qubits")
        support = [q for q, ch in enumerate(word) if ch != "I"]
        for q in support:
            if word[q] != self.basis[q]:
                raise ValueError(
                    f"term {word!r} not measurable in basis {self.basis!r} (qubit {q})"
                )
        bits = self.terminal[self.accepted][:, support]
        return np.prod(1.0 - 2.0 * bits, axis=1) if support else \
            np.ones(self.n_accepted)


def run_shots(
    circuit: Circuit,
    psi0: StateVector,
    n_shots: int,
    seed: int,
    terminal_basis: str | None = None,
) -> ShotRun:
    """Sample n_shots trajectories; rejected shots stop at the failed check.

    terminal_basis is one letter per visible qubit ('Z', 'X', or 'Y'); after
    the circuit, each surviving shot is rotated accordingly and a bitstring
    is sampled (bit b means eigenvalue (-1)^b of that qubit's basis letter).
    """
    n = circuit.n_qubits
    nv = circuit.n_visible
    basis = terminal_basis or "Z" * nv
    if len(basis) != nv or set(basis) - set("ZXY"):
        raise ValueError(f"terminal basis {basis!r} must be one of Z/X/Y per visible qubit")
    rng = np.random.Generator(np.random.Philox(key=seed & ((1 << 64) - 1)))
    amps = np.tile(_embed(circuit, psi0), (n_shots, 1))
    alive = np.arange(n_shots)
    accepted = np.ones(n_shots, dtype=bool)
    cbits = np.full((n_shots, circuit.n_cbits), -1, dtype=np.int8)
    terminal = np.full((n_shots, nv), -1, dtype=np.int8)
    for g in circuit.gates:
        if alive.size == 0:
            break
        if g.kind == "measure":
            q = g.qubits[0]
            p1 = _outcome_probs(amps, n, q)
            draws = rng.random(alive.size)
            outcomes = (draws < p1).astype(np.int8)
            cbits[alive, g.cbit] = outcomes
            shaped = amps.reshape(alive.size, 1 << q, 2, -1)
            ones = outcomes == 1
            shaped[~ones, :, 1, :] = 0.0
            shaped[ones, :, 0, :] = 0.0
            p_kept = np.sum(np.abs(shaped) ** 2, axis=(1, 2, 3))
            amps /= np.sqrt(np.maximum(p_kept, ZERO_WEIGHT))[:, None]
        elif g.kind == "postselect":
            keep = cbits[alive, g.cbit] == g.value
            accepted[alive[~keep]] = False
            alive = alive[keep]
            amps = amps[keep]
        elif g.kind == "reset":
            q = g.qubits[0]
            shaped = amps.reshape(alive.size, 1 << q, 2, -1)
            stray = np.sum(np.abs(shaped[:, :, 1, :]) ** 2, axis=(1, 2))
            if np.any(stray > 1e-10):
                raise SimulationError(
                    "sampled reset requires the qubit to be measured first"
                )
            shaped[:, :, 1, :] = 0.0
        else:
            _apply_unitary(amps, n, g)
    if alive.size:
        for q, ch in enumerate(basis):
            if ch == "X":
                _apply_1q(amps, n, q, HX)
            elif ch == "Y":
                _apply_1q(amps, n, q, HY_DAG)
        probs = np.abs(amps) ** 2
        cums = np.cumsum(probs, axis=1)
        cums /= cums[:, -1:]
        draws = rng.random(alive.size)
        indices = np.minimum(
            np.sum(cums < draws[:, None], axis=1), (1 << n) - 1
        )
        shifts = np.array([n - 1 - q for q in range(nv)])
        terminal[alive] = ((indices[:, None] >> shifts[None, :]) & 1).astype(np.int8)
    return ShotRun(basis, accepted, cbits, terminal)


def expectation(psi: StateVector, h: Hamiltonian) -> float:
    """<psi|H|psi> for a normalized state, asserted real."""
    if psi.n_qubits != h.n_qubits:
        raise ValueError(f"state has {psi.n_qubits} qubits, Hamiltonian {h.n_qubits}")
    vec = psi.normalized().amps
    total = 0.0 + 0.0j
    for t in h.terms:
        total += t.coefficient * np.vdot(vec, apply_word(t.string.word, vec))
    assert abs(total.imag) < 1e-10, f"expectation has imaginary part {total.imag}"
    return float(total.real)


def expectation_from_samples(run: ShotRun, terms) -> list[float]:
    """Sample means of Pauli words over a run's accepted shots.

    Every term must be diagonal in the run's terminal basis (its letters
    must match the basis letters on its support).
    """
    if run.n_accepted == 0:
        raise SimulationError("no accepted samples")
    return [float(np.mean(run.word_values(t))) for t in terms]


def imaginary_time_oracle(
    h: Hamiltonian, tau: float, psi0: StateVector, limit: int = 12
) -> StateVector:
    """Normalized exp(-tau H) psi0 by Hermitian eigendecomposition (exact)."""
    mat = dense_matrix(h, limit=limit)
    vals, vecs = np.linalg.eigh(mat)
    coords = vecs.conj().T @ psi0.normalized().amps
    coords *= np.exp(-tau * (vals - vals.min()))  # gauge shift avoids overflow
    amps = vecs @ coords
    norm = np.linalg.norm(amps)
    if norm < ZERO_WEIGHT:
        raise SimulationError("initial state annihilated by the propagator")
    return StateVector(h.n_qubits, amps / norm)


def n_trotter_steps(tau: float, dtau: float) -> int:
    if dtau <= 0:
        raise ValueError(f"dtau must be positive, got {dtau}")
    n = round(tau / dtau)
    if abs(n * dtau - tau) > 1e-12 * max(1.0, abs(tau)):
        raise ValueError(f"tau {tau!r} is not an integer multiple of dtau {dtau!r}")
    return n


def trotterized_oracle(
    h: Hamiltonian, tau: float, dtau: float, order: int, psi0: StateVector
) -> StateVector:
    """Normalized product of per-term exp(-dtau_eff c P) factors, using the
    same term grouping and order as the circuit builder (isolates encoding
    error from Trotter error)."""
    from .circuits import trotter_groups  # local import avoids a cycle

    n_steps = n_trotter_steps(tau, dtau)
    amps = psi0.normalized().amps.copy()
    groups = trotter_groups(h, order)
    for _ in range(n_steps):
        for terms, factor in groups:
            for t in terms:
                k = dtau * factor * t.coefficient
                amps = np.cosh(k) * amps - np.sinh(k) * apply_word(t.string.word, amps)
        amps /= np.linalg.norm(amps)
    return StateVector(h.n_qubits, amps)
