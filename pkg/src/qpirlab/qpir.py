"""Private-information-retrieval wrappers around the protocol engine.

Party A is the server (database input x, 2^n-dimensional computational
encoding), party B the client (index input i, n-dimensional encoding).
Correctness is judged by optimal discrimination of the client's final
states averaged over databases; privacy by comparing the purified server's
marginals across index inputs.
"""

from __future__ import annotations

import math
import urllib.parse
from dataclasses import dataclass

import numpy as np

from .errors import LayoutError
from .linalg import (
    HelstromResult,
    haar_unitary_matrix,
    helstrom_matrices,
    trace_distance_matrices,
)
from .registers import Register, RegisterLayout, concat
from .states import Isometry, KrausChannel, StateVector, reduced_density_matrix
from .protocol import (
    ProtocolSpec,
    communication_complexity,
    execute_pure_batch,
    purify_both,
)


def bit_of(x: int, i: int, n: int) -> int:
    """Bit i (1-indexed, x_1 most significant) of the n-bit database x."""
    return (x >> (n - i)) & 1


@dataclass(frozen=True)
class QpirProtocol:
    """An n-bit QPIR protocol: server input space 2^n, client input space n."""

    n: int
    spec: ProtocolSpec

    def __post_init__(self) -> None:
        if self.n < 1:
            raise LayoutError(f"database size must be >= 1, got {self.n}")
        da = self.spec.a_memory[0].total_dim
        db = self.spec.b_memory[0].total_dim
        if da != 2 ** self.n or db != self.n:
            raise LayoutError(
                f"server/client input dims ({da}, {db}) != (2^{self.n}, {self.n})"
            )

    @property
    def communication(self) -> float:
        return communication_complexity(self.spec)

    def client_labels(self) -> tuple[str, ...]:
        return self.spec.b_memory[-1].labels()


def qpir_input(qpir: QpirProtocol, x: int | None, i: int,
               with_reference: bool = False) -> StateVector:
    """Input |x>|i> (or the uniform database superposition for x=None).

    `with_reference` appends the inert reference register in |0>, at its
    full dimension dim(A_0)*dim(B_0).
    """
    n = qpir.n
    if not 1 <= i <= n:
        raise LayoutError(f"index {i} outside 1..{n}")
    da = 2 ** n
    if x is None:
        amps_a = np.full(da, 1.0 / math.sqrt(da), dtype=np.complex128)
    else:
        if not 0 <= x < da:
            raise LayoutError(f"database value {x} outside 0..{da - 1}")
        amps_a = np.zeros(da, dtype=np.complex128)
        amps_a[x] = 1.0
    amps_b = np.zeros(n, dtype=np.complex128)
    amps_b[i - 1] = 1.0
    lay = concat(qpir.spec.a_memory[0], qpir.spec.b_memory[0])
    amps = np.kron(amps_a, amps_b)
    if with_reference:
        ref = np.zeros(lay.total_dim, dtype=np.complex128)
        ref[0] = 1.0
        amps = np.kron(amps, ref)
        lay = concat(lay, RegisterLayout((Register("R", lay.total_dim),)))
    return StateVector(lay, amps)


# ---------------------------------------------------------------------------
# correctness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrectnessReport:
    """Per-index correctness errors and the optimal measurements achieving them.

    The measurement for index i distinguishes the client's average final
    state over {x : x_i = 0} from the one over {x : x_i = 1}; it depends on
    i but never on x.
    """

    n: int
    deltas: tuple[float, ...]
    delta_max: float
    delta_avg: float
    measured_labels: tuple[str, ...]
    projectors: tuple[np.ndarray, ...]   # outcome-0 projector per index


def _client_batch(qpir: QpirProtocol):
    """Run all (x, i) basis inputs at once through the purified protocol.

    Returns (final_layout, tensor) with the tensor shaped
    (client_dim, rest_dim, batch); batch index is x*n + (i-1).
    """
    spec_p = purify_both(qpir.spec)
    lay_in = concat(spec_p.a_memory[0], spec_p.b_memory[0])
    columns = np.eye(lay_in.total_dim, dtype=np.complex128)
    final_lay, final = execute_pure_batch(spec_p, lay_in, columns)
    client = qpir.client_labels()
    front = [final_lay.position(lb) for lb in client]
    rest = [k for k in range(len(final_lay)) if k not in front]
    dims = final_lay.dims()
    nb = columns.shape[1]
    t = final.reshape(dims + (nb,)).transpose(front + rest + [len(dims)])
    d_client = int(np.prod([dims[k] for k in front]))
    return spec_p, t.reshape(d_client, -1, nb)


def correctness_delta(qpir: QpirProtocol) -> CorrectnessReport:
    """Max/average failure probability of the best x-independent measurement.

    delta_i = 1 - P_Helstrom(avg over x_i=0, avg over x_i=1) at priors 1/2,
    evaluated on the client's final registers with everything else traced
    out; the overall report carries both max_i and mean_i.
    """
    n = qpir.n
    _, t = _client_batch(qpir)
    d_client = t.shape[0]
    deltas = []
    projectors = []
    half = 2 ** (n - 1)
    for i in range(1, n + 1):
        mats = []
        for b in (0, 1):
            sel = [x * n + (i - 1) for x in range(2 ** n) if bit_of(x, i, n) == b]
            m = t[:, :, sel].reshape(d_client, -1)
            mats.append((m @ m.conj().T) / half)
        res: HelstromResult = helstrom_matrices(mats[0], mats[1], 0.5)
        deltas.append(max(0.0, 1.0 - res.probability))
        projectors.append(res.projector)
    return CorrectnessReport(
        n=n,
        deltas=tuple(deltas),
        delta_max=max(deltas),
        delta_avg=float(np.mean(deltas)),
        measured_labels=qpir.client_labels(),
        projectors=tuple(projectors),
    )


# ---------------------------------------------------------------------------
# privacy against the purified server
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrivacyReport:
    """Simulator-based privacy estimate against the purified server.

    epsilon_hat is achieved by the best replay simulator (hand the server
    the reference run's marginal); pairwise_lower is the triangle-inequality
    floor any simulator must respect.
    """

    n: int
    distance_matrix: np.ndarray          # Delta(server_i, server_j) on |xi>|i>
    epsilon_by_reference: tuple[float, ...]
    epsilon_hat: float                   # min over reference indices
    reference_index: int                 # 1-based argmin
    per_index_distances: tuple[float, ...]
    pairwise_lower: float                # max pairwise distance, halved


def server_marginals(qpir: QpirProtocol,
                     x: int | None = None) -> list[np.ndarray]:
    """Purified server's reduced state per index input, on database x (or
    the uniform superposition)."""
    spec_p = purify_both(qpir.spec)
    server = spec_p.a_memory[-1].labels()
    lay_in = concat(spec_p.a_memory[0], spec_p.b_memory[0])
    cols = np.stack(
        [qpir_input(qpir, x, i).amplitudes for i in range(1, qpir.n + 1)],
        axis=1,
    )
    final_lay, final = execute_pure_batch(spec_p, lay_in, cols)
    front = [final_lay.position(lb) for lb in server]
    rest = [k for k in range(len(final_lay)) if k not in front]
    dims = final_lay.dims()
    t = final.reshape(dims + (qpir.n,)).transpose(front + rest + [len(dims)])
    d_server = int(np.prod([dims[k] for k in front]))
    t = t.reshape(d_server, -1, qpir.n)
    return [t[:, :, j] @ t[:, :, j].conj().T for j in range(qpir.n)]


def privacy_epsilon_purified(qpir: QpirProtocol,
                             include_basis_inputs: bool = False) -> PrivacyReport:
    """Estimate the ultimate privacy leak against the purified server.

    Runs the uniform-superposition database input with every index (and
    optionally every basis database), compares the server-side marginals,
    and reports the best replay-simulator epsilon together with the
    simulator-independent pairwise lower bound.
    """
    n = qpir.n
    margs = server_marginals(qpir, None)
    dist = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            dist[a, b] = dist[b, a] = trace_distance_matrices(margs[a], margs[b])
    if include_basis_inputs:
        for x in range(2 ** n):
            mx = server_marginals(qpir, x)
            for a in range(n):
                for b in range(a + 1, n):
                    d = trace_distance_matrices(mx[a], mx[b])
                    if d > dist[a, b]:
                        dist[a, b] = dist[b, a] = d
    by_ref = tuple(float(np.max(dist[:, j])) for j in range(n))
    ref = int(np.argmin(by_ref))
    dist.setflags(write=False)
    return PrivacyReport(
        n=n,
        distance_matrix=dist,
        epsilon_by_reference=by_ref,
        epsilon_hat=by_ref[ref],
        reference_index=ref + 1,
        per_index_distances=tuple(float(d) for d in dist[:, ref]),
        pairwise_lower=float(np.max(dist)) / 2.0,
    )


# ---------------------------------------------------------------------------
# built-in protocols
# ---------------------------------------------------------------------------

def _copy_matrix(d: int) -> np.ndarray:
    """Basis-copy isometry |j> -> |j>|j>."""
    v = np.zeros((d * d, d), dtype=np.complex128)
    for j in range(d):
        v[j * d + j, j] = 1.0
    return v


def _layout(label: str, dim: int) -> RegisterLayout:
    return RegisterLayout((Register(label, dim),))


def build_trivial(n: int) -> QpirProtocol:
    """Server keeps a basis copy of x and ships |x> whole; client stores it."""
    da = 2 ** n
    a0, a1 = _layout("A0", da), _layout("A1", da)
    x1 = _layout("X1", da)
    b0, b1 = _layout("B0", n), _layout("B1", n * da)
    a_op = Isometry(a0, concat(a1, x1), _copy_matrix(da))
    b_op = Isometry(concat(b0, x1), b1, np.eye(n * da, dtype=np.complex128))
    spec = ProtocolSpec(1, (a0, a1), (b0, b1), (x1,), (), (a_op,), (b_op,))
    return QpirProtocol(n, spec)


def build_index_in_clear(n: int) -> QpirProtocol:
    """Client announces i in the clear; server answers the one bit x_i.

    Sub-linear communication (log2 n + 1 qubits) bought by giving up
    privacy entirely: the server's memory ends up holding |i>.
    """
    da = 2 ** n
    a0, a1, a2 = _layout("A0", da), _layout("A1", da), _layout("A2", da * n)
    x1, x2 = _layout("X1", 1), _layout("X2", 2)
    b0, b1, b2 = _layout("B0", n), _layout("B1", n), _layout("B2", 2 * n)
    y1 = _layout("Y1", n)

    a1_op = Isometry(a0, concat(a1, x1), np.eye(da, dtype=np.complex128))
    b1_op = Isometry(concat(b0, x1), concat(b1, y1), _copy_matrix(n))
    answer = np.zeros((da * n * 2, da * n), dtype=np.complex128)
    for x in range(da):
        for i in range(1, n + 1):
            col = x * n + (i - 1)
            answer[col * 2 + bit_of(x, i, n), col] = 1.0
    a2_op = Isometry(concat(a1, y1), concat(a2, x2), answer)
    b2_op = Isometry(concat(b1, x2), b2, np.eye(2 * n, dtype=np.complex128))
    spec = ProtocolSpec(2, (a0, a1, a2), (b0, b1, b2), (x1, x2), (y1,),
                        (a1_op, a2_op), (b1_op, b2_op))
    return QpirProtocol(n, spec)


def build_noisy_trivial(n: int, delta: float) -> QpirProtocol:
    """Trivial protocol with client-side noise tuned to correctness error delta.

    Each stored database qubit passes through a bit-flip channel of
    strength delta, which makes every per-index Helstrom error exactly
    delta while keeping the purifying environment at 2^n dimensions.
    """
    if not 0.0 <= delta <= 0.5:
        raise LayoutError(f"noise level must lie in [0, 0.5], got {delta}")
    da = 2 ** n
    base = build_trivial(n)
    a0, a1 = base.spec.a_memory
    (x1,) = base.spec.x_comm
    b0, b1 = base.spec.b_memory
    if delta == 0.0:
        return base
    flip = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
    eye2 = np.eye(2, dtype=np.complex128)
    kraus = []
    for mask in range(da):
        f = np.ones((1, 1), dtype=np.complex128)
        for j in range(n):
            factor = math.sqrt(delta) * flip if (mask >> j) & 1 else \
                math.sqrt(1.0 - delta) * eye2
            f = np.kron(f, factor)
        kraus.append(np.kron(np.eye(n, dtype=np.complex128), f))
    b_op = KrausChannel(concat(b0, x1), b1, tuple(kraus))
    spec = ProtocolSpec(1, (a0, a1), (b0, b1), (x1,), (),
                        base.spec.a_ops, (b_op,))
    return QpirProtocol(n, spec)


def build_random_qpir(n: int, seed: int) -> QpirProtocol:
    """Seeded 2-round fuzzing protocol with Haar-random unitary rounds.

    The server rotates and ships a basis copy of the database (keeping the
    copy), the client scrambles everything it holds and may send some
    qubits back, and the server scrambles whatever returns.  Keeping the
    copy pins the database branches to orthogonal server states, so the
    compression step of the encoding reduction stays well-posed.
    """
    rng = np.random.default_rng(seed)
    da = 2 ** n
    ell = int(rng.integers(0, 2))       # qubits sent back by the client
    kq = int(rng.integers(0, ell + 1))  # qubits the server re-sends

    a0, a1 = _layout("A0", da), _layout("A1", da)
    x1 = _layout("X1", da)
    b0 = _layout("B0", n)
    b1 = _layout("B1", n * da // (2 ** ell))
    y1 = _layout("Y1", 2 ** ell)
    a2 = _layout("A2", da * 2 ** (ell - kq))
    x2 = _layout("X2", 2 ** kq)
    b2 = _layout("B2", b1.total_dim * 2 ** kq)

    u_a = haar_unitary_matrix(da, rng)
    u_x = haar_unitary_matrix(da, rng)
    a1_op = Isometry(a0, concat(a1, x1), np.kron(u_a, u_x) @ _copy_matrix(da))
    b1_op = Isometry(concat(b0, x1), concat(b1, y1),
                     haar_unitary_matrix(n * da, rng))
    a2_op = Isometry(concat(a1, y1), concat(a2, x2),
                     np.kron(np.eye(da, dtype=np.complex128),
                             haar_unitary_matrix(2 ** ell, rng)))
    b2_op = Isometry(concat(b1, x2), b2,
                     haar_unitary_matrix(b2.total_dim, rng))
    spec = ProtocolSpec(2, (a0, a1, a2), (b0, b1, b2), (x1, x2), (y1,),
                        (a1_op, a2_op), (b1_op, b2_op))
    return QpirProtocol(n, spec)


_BUILTIN_ALIASES = {
    "trivial": "trivial",
    "trivial-qpir": "trivial",
    "index-in-clear": "index-in-clear",
    "noisy-trivial": "noisy-trivial",
    "random": "random",
    "random-qpir": "random",
}


def builtin(name: str, n: int, delta: float | None = None,
            seed: int | None = None) -> QpirProtocol:
    """Construct a named built-in protocol."""
    kind = _BUILTIN_ALIASES.get(name)
    if kind is None:
        raise LayoutError(
            f"unknown builtin {name!r}; known: {sorted(set(_BUILTIN_ALIASES))}"
        )
    if kind == "trivial":
        return build_trivial(n)
    if kind == "index-in-clear":
        return build_index_in_clear(n)
    if kind == "noisy-trivial":
        if delta is None:
            raise LayoutError("noisy-trivial requires a delta parameter")
        return build_noisy_trivial(n, delta)
    return build_random_qpir(n, 0 if seed is None else seed)


def parse_builtin_address(address: str) -> tuple[str, dict[str, str]]:
    """Split 'builtin:name?k=v&...' into the name and its parameters."""
    if not address.startswith("builtin:"):
        raise LayoutError(f"not a builtin address: {address!r}")
    rest = address[len("builtin:"):]
    name, _, query = rest.partition("?")
    params = {k: v[-1] for k, v in urllib.parse.parse_qs(query).items()}
    return name, params


def builtin_from_address(address: str, n: int | None = None,
                         seed: int | None = None) -> QpirProtocol:
    name, params = parse_builtin_address(address)
    if "n" in params:
        n = int(params["n"])
    if n is None:
        raise LayoutError(f"builtin address {address!r} needs an n parameter")
    delta = float(params["delta"]) if "delta" in params else None
    if "seed" in params:
        seed = int(params["seed"])
    return builtin(name, n, delta=delta, seed=seed)
