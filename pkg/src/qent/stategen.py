"""Random pure- and mixed-state generators.

Pure states come from parameterized gate circuits or from direct uniform
(Haar) sampling; mixed states come from explicit convex mixtures, from
tracing out part of a larger pure register, or from Kronecker products of
single-qubit mixed factors.  Every generator takes an explicit
``numpy.random.Generator`` and is a pure function of it.
"""

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .qcore import kron_all, num_qubits, partial_trace

TAU = 2.0 * np.pi


@dataclass(frozen=True)
class GateParams:
    """Angles (radians) of a parameterized gate; gamma is the controlled-gate phase."""

    theta: float
    phi: float
    lam: float
    gamma: float = 0.0

    def __post_init__(self):
        for name in ("theta", "phi", "lam", "gamma"):
            v = getattr(self, name)
            if not (0.0 <= v < TAU):
                raise ValueError(f"{name}={v} outside [0, 2*pi)")


@dataclass(frozen=True)
class CircuitOp:
    """One gate application: kind 'u' (single-qubit) or 'cu' (controlled)."""

    kind: str
    target: int
    params: GateParams
    control: int | None = None

    def __post_init__(self):
        if self.kind not in ("u", "cu"):
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind == "cu" and (self.control is None or self.control == self.target):
            raise ValueError("controlled gate needs a control distinct from its target")
        if self.kind == "u" and self.control is not None:
            raise ValueError("single-qubit gate must not carry a control")


@dataclass
class CircuitSpec:
    """Ordered gate list on a register, plus the derived entangling connectivity."""

    num_qubits: int
    ops: list = field(default_factory=list)

    @property
    def cu_pairs(self) -> frozenset:
        """Unordered qubit pairs touched by any controlled gate."""
        return frozenset(
            frozenset((op.control, op.target)) for op in self.ops if op.kind == "cu"
        )


def u_gate(theta: float, phi: float, lam: float) -> np.ndarray:
    """General single-qubit rotation from three Euler angles (2x2 unitary)."""
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=complex,
    )


def cu_gate(theta: float, phi: float, lam: float, gamma: float) -> np.ndarray:
    """Controlled single-qubit rotation with an extra phase on the active block.

    Basis order is |control target>, control being the more significant bit:
    the upper-left 2x2 block is the identity, the lower-right block is
    ``exp(i*gamma) * u_gate(theta, phi, lam)``.
    """
    g = np.eye(4, dtype=complex)
    g[2:, 2:] = np.exp(1j * gamma) * u_gate(theta, phi, lam)
    return g


def apply_gate(state: np.ndarray, gate: np.ndarray, targets) -> np.ndarray:
    """Apply a 2**t-dimensional gate to the listed qubits of a state vector.

    ``targets[j]`` supplies bit j of the gate's own basis index, so for a
    controlled gate built by :func:`cu_gate` pass ``[target, control]``.
    """
    state = np.asarray(state, dtype=complex)
    n = num_qubits(state.shape[0])
    targets = [int(q) for q in targets]
    t = len(targets)
    if len(set(targets)) != t:
        raise ValueError(f"duplicate target qubits in {targets}")
    if any(q < 0 or q >= n for q in targets):
        raise ValueError(f"targets {targets} out of range for {n} qubits")
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (1 << t, 1 << t):
        raise ValueError(f"gate shape {gate.shape} does not act on {t} qubit(s)")

    psi = state.reshape([2] * n)
    # Gather gate axes so the flattened trailing index reads (bit of
    # targets[t-1], ..., bit of targets[0]), matching the gate's basis order.
    src = [n - 1 - targets[j] for j in reversed(range(t))]
    psi = np.moveaxis(psi, src, range(n - t, n))
    shape = psi.shape
    psi = psi.reshape(-1, 1 << t) @ gate.T
    psi = np.moveaxis(psi.reshape(shape), range(n - t, n), src)
    return psi.reshape(-1)


def run_circuit(spec: CircuitSpec) -> np.ndarray:
    """Run a circuit on the all-zeros register and return the state vector."""
    psi = np.zeros(1 << spec.num_qubits, dtype=complex)
    psi[0] = 1.0
    for op in spec.ops:
        p = op.params
        if op.kind == "u":
            psi = apply_gate(psi, u_gate(p.theta, p.phi, p.lam), [op.target])
        else:
            psi = apply_gate(
                psi, cu_gate(p.theta, p.phi, p.lam, p.gamma), [op.target, op.control]
            )
    return psi


def _random_u_params(rng) -> GateParams:
    a = rng.uniform(0.0, TAU, size=3)
    return GateParams(a[0], a[1], a[2])


def _random_cu_params(rng) -> GateParams:
    a = rng.uniform(0.0, TAU, size=4)
    return GateParams(a[0], a[1], a[2], a[3])


def random_circuit_state(n: int, entangling: bool, rng) -> tuple:
    """Random circuit state: local layer, optional controlled gates, local layer.

    With ``entangling`` the number of controlled gates is uniform on
    ``[1, 2*C(n,2))`` and each lands on a uniformly random ordered
    (control, target) pair; without it the circuit stays a product state.
    Returns ``(state, CircuitSpec)``.
    """
    if n < 2:
        raise ValueError("need at least 2 qubits")
    ops = [CircuitOp("u", q, _random_u_params(rng)) for q in range(n)]
    if entangling:
        k = int(rng.integers(1, 2 * comb(n, 2)))
        for _ in range(k):
            c = int(rng.integers(n))
            t = int(rng.integers(n - 1))
            if t >= c:
                t += 1
            ops.append(CircuitOp("cu", t, _random_cu_params(rng), control=c))
    ops += [CircuitOp("u", q, _random_u_params(rng)) for q in range(n)]
    spec = CircuitSpec(n, ops)
    return run_circuit(spec), spec


def haar_state(n: int, rng) -> np.ndarray:
    """Uniformly random pure state on n qubits.

    Moduli come from normalized exponential variates ``y_i = -log(x_i)`` with
    ``x_i`` uniform on (0, 1]; phases are uniform on [0, 2*pi).
    """
    if n < 1:
        raise ValueError("need at least 1 qubit")
    k = 1 << n
    x = 1.0 - rng.random(k)  # uniform on (0, 1]
    y = -np.log(x)
    gamma = TAU * rng.random(k)
    return np.sqrt(y / y.sum()) * np.exp(1j * gamma)


def ghz_state(n: int) -> np.ndarray:
    """(|0...0> + |1...1>) / sqrt(2)."""
    if n < 2:
        raise ValueError("need at least 2 qubits")
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = psi[-1] = 1.0 / np.sqrt(2.0)
    return psi


def w_state(n: int) -> np.ndarray:
    """Uniform superposition of all single-excitation basis states."""
    if n < 2:
        raise ValueError("need at least 2 qubits")
    psi = np.zeros(1 << n, dtype=complex)
    for q in range(n):
        psi[1 << q] = 1.0 / np.sqrt(n)
    return psi


def randomize_local(obj: np.ndarray, rng) -> np.ndarray:
    """Apply an independent random single-qubit rotation to every qubit.

    Accepts a state vector or a density matrix; a density matrix is
    conjugated by the product unitary, leaving its spectrum (and every
    bipartite negativity) unchanged.
    """
    obj = np.asarray(obj, dtype=complex)
    if obj.ndim == 1:
        n = num_qubits(obj.shape[0])
        for q in range(n):
            p = _random_u_params(rng)
            obj = apply_gate(obj, u_gate(p.theta, p.phi, p.lam), [q])
        return obj
    if obj.ndim == 2:
        n = num_qubits(obj.shape[0])
        locals_ = []
        for _ in range(n):
            p = _random_u_params(rng)
            locals_.append(u_gate(p.theta, p.phi, p.lam))
        v = kron_all(list(reversed(locals_)))  # factor for qubit n-1 first
        return v @ obj @ v.conj().T
    raise ValueError("expected a state vector or a density matrix")


@dataclass
class MixtureSpec:
    """Convex mixture of pure components: weights plus state vectors."""

    probs: np.ndarray
    components: list

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if len(self.components) != self.probs.shape[0] or self.probs.shape[0] < 1:
            raise ValueError("need one weight per component, at least one component")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        dims = {c.shape[0] for c in self.components}
        if len(dims) != 1:
            raise ValueError("components live in different Hilbert spaces")

    @property
    def d(self) -> int:
        return int(self.probs.shape[0])


def random_probs(d: int, rng) -> np.ndarray:
    """Mixture weights: i.i.d. uniform-(0,1] samples, normalized."""
    u = 1.0 - rng.random(d)
    return u / u.sum()


def mix_states(spec: MixtureSpec) -> np.ndarray:
    """Density matrix of the mixture: sum of weighted pure projectors."""
    dim = spec.components[0].shape[0]
    rho = np.zeros((dim, dim), dtype=complex)
    for p, psi in zip(spec.probs, spec.components):
        rho += p * np.outer(psi, psi.conj())
    return rho


def traced_mixed_state(n_target: int, n_extra: int, rng) -> tuple:
    """Mixed state from tracing the top ``n_extra`` qubits of a larger circuit state.

    The surviving qubits are 0..n_target-1, so the returned circuit's gate
    connectivity maps onto them unchanged.  Returns ``(rho, CircuitSpec)``
    where the circuit acts on the full ``n_target + n_extra`` register.
    """
    if n_extra < 1:
        raise ValueError("need at least one traced qubit")
    psi, spec = random_circuit_state(n_target + n_extra, True, rng)
    rho = np.outer(psi, psi.conj())
    reduced = partial_trace(rho, range(n_target, n_target + n_extra))
    return reduced, spec


def random_single_qubit_mixed(rng) -> np.ndarray:
    """Random mixed qubit state: marginal of a uniformly random two-qubit pure state."""
    psi = haar_state(2, rng)
    return partial_trace(np.outer(psi, psi.conj()), [1])


def assemble_kron_mixture(probs, factor_groups) -> np.ndarray:
    """Mixture of products: sum_i p_i (rho_0^i x ... x rho_{n-1}^i).

    ``factor_groups[i][q]`` is the single-qubit factor of term i on qubit q.
    """
    terms = []
    for factors in factor_groups:
        terms.append(kron_all(list(reversed(list(factors)))))
    rho = np.zeros_like(terms[0])
    for p, t in zip(probs, terms):
        rho += p * t
    return rho


def kron_separable_mixed(n: int, rng, d: int | None = None) -> np.ndarray:
    """Separable-by-construction mixture of products of random mixed qubits."""
    if n < 2:
        raise ValueError("need at least 2 qubits")
    if d is None:
        d = int(rng.integers(1, (1 << n) + 1))
    probs = random_probs(d, rng)
    groups = [[random_single_qubit_mixed(rng) for _ in range(n)] for _ in range(d)]
    return assemble_kron_mixture(probs, groups)
