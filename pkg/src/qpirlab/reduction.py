"""Reduction from a QPIR protocol to a random access encoding, plus the
communication lower bound it certifies.

Pipeline: purify both parties, run the uniform-database superposition to
find the client subspace actually used, Schmidt-compress it, encode each
database as the compressed client state of the index-1 run, and decode any
index i by rotating the index-1 run onto the index-i run with a purifier-
side (Uhlmann) unitary before measuring.  The measured recovery rate feeds
the entropy bound on random-access-encoding size, which in turn bounds the
protocol's communication from below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LayoutError, SupportViolation
from .linalg import (
    DEFAULT_RANK_TOL,
    binary_entropy,
    pure_distance_amplitudes,
    schmidt_compressor,
    trace_distance_matrices,
    uhlmann_unitary,
)
from .registers import RegisterLayout, concat
from .states import (
    DensityOperator,
    Isometry,
    StateVector,
    apply_matrix_to_factor,
    reduced_density_matrix,
)
from .protocol import (
    ProtocolSpec,
    communication_complexity,
    execute_pure_batch,
    purify_both,
)
from .qpir import (
    CorrectnessReport,
    PrivacyReport,
    QpirProtocol,
    bit_of,
    correctness_delta,
    privacy_epsilon_purified,
    qpir_input,
    server_marginals,
)

#: Above this privacy leak the purifier-rotation argument says nothing:
#: the marginal-distance budget 2*eps stops being a trace-distance bound.
PRIVACY_PREMISE_MAX = 0.5


def _final_batch(spec_pp: ProtocolSpec, columns: np.ndarray):
    lay_in = concat(spec_pp.a_memory[0], spec_pp.b_memory[0])
    return execute_pure_batch(spec_pp, lay_in, columns)


def nu_state(qpir: QpirProtocol, i: int,
             spec_pp: ProtocolSpec | None = None) -> StateVector:
    """Final pure state of the doubly-purified run on the uniform database
    superposition with index i; equals the normalized sum of the per-x runs
    by linearity."""
    spec_pp = spec_pp or purify_both(qpir.spec)
    cols = qpir_input(qpir, None, i).amplitudes[:, None]
    lay, out = _final_batch(spec_pp, cols)
    return StateVector(lay, out[:, 0])


@dataclass(frozen=True)
class RandomAccessEncoding:
    """n-bit strings encoded as states on the compressed client space.

    m is log2 of the compressed dimension (reported with its qubit
    ceiling); decoding index i decompresses, applies the index-rotation
    unitary, and measures the per-index discrimination projector.
    """

    n: int
    communication: float
    m: float
    m_ceil: int
    compressed_dim: int
    compressor: Isometry                     # compressed register -> client factor
    client_labels: tuple[str, ...]
    measured_labels: tuple[str, ...]         # original client registers
    encoder: tuple[DensityOperator, ...]     # state per database x
    rotations: tuple[Isometry, ...]          # U^{1->i} on the client factor
    projectors: tuple[np.ndarray, ...]       # outcome-0 projector per index
    correctness: CorrectnessReport
    rotation_distances: tuple[float, ...]    # D((1 x U)nu_1, nu_i) achieved
    marginal_distances: tuple[float, ...]    # D(tr_C nu_i, tr_C nu_1)
    spec_pp: ProtocolSpec
    compressed_runs: np.ndarray              # (r, server_dim, 2^n), unit columns


def build_rae(qpir: QpirProtocol,
              rank_tol: float = DEFAULT_RANK_TOL) -> RandomAccessEncoding:
    """Construct the random access encoding induced by a QPIR protocol.

    The compressor comes from the support of the client marginal of the
    index-1 superposition run; every per-database run must live inside
    that support (a violation signals a rank-tolerance misconfiguration or
    a protocol whose server does not retain the database branches).
    """
    n = qpir.n
    spec_pp = purify_both(qpir.spec)
    da = 2 ** n

    nu1 = nu_state(qpir, 1, spec_pp)
    client = spec_pp.b_memory[-1].labels()
    server = spec_pp.a_memory[-1].labels()
    measured = qpir.client_labels()
    if client[: len(measured)] != measured:
        raise LayoutError("client registers are not front-contiguous")

    compressor = schmidt_compressor(nu1, client, rank_tol=rank_tol,
                                    compressed_label="C'")
    r = compressor.input_layout.total_dim
    m = math.log2(r)

    # all per-database runs of the index-1 protocol, client factor in front
    cols = np.stack(
        [qpir_input(qpir, x, 1).amplitudes for x in range(da)], axis=1
    )
    final_lay, final = _final_batch(spec_pp, cols)
    front = [final_lay.position(lb) for lb in client]
    rest = [k for k in range(len(final_lay)) if k not in front]
    dims = final_lay.dims()
    t = final.reshape(dims + (da,)).transpose(front + rest + [len(dims)])
    d_client = int(np.prod([dims[k] for k in front]))
    t = t.reshape(d_client, -1, da)

    emat = compressor.matrix
    comp = np.einsum("ci,csx->isx", emat.conj(), t, optimize=True)
    proj_back = np.einsum("ci,isx->csx", emat, comp, optimize=True)
    leaks = np.linalg.norm((t - proj_back).reshape(-1, da), axis=0)
    worst = float(np.max(leaks))
    if worst > 1e-8:
        raise SupportViolation(
            f"a database run leaves the compression support by {worst:.3e}; "
            f"check the rank tolerance ({rank_tol})"
        )
    norms = np.linalg.norm(comp.reshape(-1, da), axis=0)
    comp = comp / norms

    c_prime = compressor.input_layout
    encoder = []
    for x in range(da):
        mat = comp[:, :, x] @ comp[:, :, x].conj().T
        mat = mat / np.trace(mat).real
        encoder.append(DensityOperator(c_prime, mat))

    correctness = correctness_delta(qpir)

    rotations = []
    rot_dist = []
    marg_dist = []
    server_ref = None
    for i in range(1, n + 1):
        nui = nu_state(qpir, i, spec_pp) if i != 1 else nu1
        u = uhlmann_unitary(nui, nu1, purifier=client)
        rotations.append(u)
        rotated = _rotate_client(nu1, u, client)
        rot_dist.append(pure_distance_amplitudes(nui.amplitudes, rotated))
        marg = reduced_density_matrix(nui, server)
        if server_ref is None:
            server_ref = marg
        marg_dist.append(trace_distance_matrices(marg, server_ref))

    comp.setflags(write=False)
    return RandomAccessEncoding(
        n=n,
        communication=communication_complexity(qpir.spec),
        m=m,
        m_ceil=math.ceil(m - 1e-12),
        compressed_dim=r,
        compressor=compressor,
        client_labels=client,
        measured_labels=measured,
        encoder=tuple(encoder),
        rotations=tuple(rotations),
        projectors=correctness.projectors,
        correctness=correctness,
        rotation_distances=tuple(rot_dist),
        marginal_distances=tuple(marg_dist),
        spec_pp=spec_pp,
        compressed_runs=comp,
    )


def _rotate_client(nu: StateVector, u: Isometry,
                   client: tuple[str, ...]) -> np.ndarray:
    """(1 x U) nu as raw amplitudes in nu's own register order."""
    return apply_matrix_to_factor(u.matrix, nu, client).amplitudes


def decode_bit(rae: RandomAccessEncoding, codeword: DensityOperator,
               i: int) -> tuple[float, float]:
    """Outcome probabilities (bit 0, bit 1) of decoding index i.

    Decompress onto the client factor, rotate the index-1 run onto the
    index-i run, trace the purifier part, and apply the index-i projector.
    """
    if not 1 <= i <= rae.n:
        raise LayoutError(f"index {i} outside 1..{rae.n}")
    if codeword.layout != rae.compressor.input_layout:
        raise LayoutError(
            f"codeword layout {codeword.layout.registers} != compressed space "
            f"{rae.compressor.input_layout.registers}"
        )
    e = rae.compressor.matrix
    u = rae.rotations[i - 1].matrix
    rho = (u @ e) @ codeword.matrix @ (u @ e).conj().T
    d_meas = int(np.prod([rae.spec_pp.b_memory[-1].dim_of(lb)
                          for lb in rae.measured_labels]))
    d_bar = rho.shape[0] // d_meas
    rho = rho.reshape(d_meas, d_bar, d_meas, d_bar)
    rho_meas = np.einsum("abcb->ac", rho)
    p0 = float(np.real(np.trace(rae.projectors[i - 1] @ rho_meas)))
    p0 = min(1.0, max(0.0, p0))
    return p0, 1.0 - p0


def recovery_rates(rae: RandomAccessEncoding) -> tuple[tuple[float, ...], float]:
    """Average probability of recovering bit i over uniform databases.

    Works on the stored pure runs (decoding commutes with tracing the
    server side), batching all databases through one matmul per index.
    """
    n = rae.n
    da = 2 ** n
    comp = rae.compressed_runs           # (r, d_server, da)
    r, d_server, _ = comp.shape
    e = rae.compressor.matrix            # (d_client, r)
    d_meas = int(np.prod([rae.spec_pp.b_memory[-1].dim_of(lb)
                          for lb in rae.measured_labels]))
    d_bar = e.shape[0] // d_meas
    rates = []
    for i in range(1, n + 1):
        decode = rae.rotations[i - 1].matrix @ e                    # (d_client, r)
        decoded = decode @ comp.reshape(r, -1)                      # (d_client, ds*da)
        decoded = decoded.reshape(d_meas, d_bar * d_server * da)
        w, v = np.linalg.eigh(rae.projectors[i - 1])
        plus = v[:, w > 0.5]
        amp = plus.conj().T @ decoded
        p0 = np.sum(
            np.abs(amp.reshape(-1, d_bar * d_server, da)) ** 2, axis=(0, 1)
        )
        correct = [p0[x] if bit_of(x, i, n) == 0 else 1.0 - p0[x]
                   for x in range(da)]
        rates.append(float(np.mean(correct)))
    return tuple(rates), float(np.mean(rates))


# ---------------------------------------------------------------------------
# bound formulas
# ---------------------------------------------------------------------------

def _unit_interval(value: float, name: str) -> float:
    """Clamp round-off dust at the ends of [0, 1]; reject real violations."""
    if not -1e-9 <= value <= 1.0 + 1e-9:
        raise ValueError(f"{name} {value} outside [0, 1]")
    return min(1.0, max(0.0, value))


def guarantee_value(delta: float, epsilon: float) -> float:
    """Recovery rate the decoder is guaranteed: 1 - delta - 2 sqrt(eps(1-eps))."""
    delta = _unit_interval(delta, "delta")
    epsilon = _unit_interval(epsilon, "epsilon")
    return 1.0 - delta - 2.0 * math.sqrt(epsilon * (1.0 - epsilon))


def lower_bound(n: int, delta: float, epsilon: float) -> float:
    """Communication lower bound (1 - H_bin(1 - delta - 2 sqrt(eps(1-eps)))) n.

    The entropy argument is clamped into [0, 1]; values below 1/2 make the
    bound vacuous and are flagged by the report layer, not clamped silently.
    """
    arg = min(1.0, max(0.0, guarantee_value(delta, epsilon)))
    return (1.0 - binary_entropy(arg)) * n


@dataclass(frozen=True)
class NayakVerdict:
    """Check of m >= (1 - H_bin(p)) n for an (n, m, p) random access encoding."""

    n: int
    m: float
    p: float
    bound: float
    slack: float
    holds: bool


def nayak_check(n: int, m: float, p: float) -> NayakVerdict:
    if not -1e-9 <= p <= 1.0 + 1e-9:
        raise ValueError(f"recovery probability {p} outside [0, 1]")
    p = min(1.0, max(0.0, p))
    bound = (1.0 - binary_entropy(p)) * n
    slack = m - bound
    return NayakVerdict(n, m, p, bound, slack, slack >= -1e-9)


# ---------------------------------------------------------------------------
# full report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    """Everything the end-to-end audit of one protocol produces."""

    n: int
    communication: float
    m: float
    m_ceil: int
    compressed_dim: int
    delta_avg: float
    delta_max: float
    deltas: tuple[float, ...]
    epsilon_used: float            # replay simulator pinned to index 1
    epsilon_min: float             # best reference index
    recovery_avg: float
    recovery_per_index: tuple[float, ...]
    guarantee: float
    bound_value: float
    nayak: NayakVerdict
    rotation_distances: tuple[float, ...]
    marginal_distances: tuple[float, ...]
    privacy_premise_ok: bool
    guarantee_vacuous: bool
    guarantee_met: bool | None     # None when the privacy premise fails
    bound_consistent: bool | None
    premise_failure: str | None
    consistency: str

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "communication": self.communication,
            "m": self.m,
            "m_ceil": self.m_ceil,
            "compressed_dim": self.compressed_dim,
            "delta_avg": self.delta_avg,
            "delta_max": self.delta_max,
            "deltas": list(self.deltas),
            "epsilon_used": self.epsilon_used,
            "epsilon_min": self.epsilon_min,
            "recovery_avg": self.recovery_avg,
            "recovery_per_index": list(self.recovery_per_index),
            "guarantee": self.guarantee,
            "bound_value": self.bound_value,
            "nayak": {
                "bound": self.nayak.bound,
                "slack": self.nayak.slack,
                "holds": self.nayak.holds,
            },
            "rotation_distances": list(self.rotation_distances),
            "marginal_distances": list(self.marginal_distances),
            "privacy_premise_ok": self.privacy_premise_ok,
            "guarantee_vacuous": self.guarantee_vacuous,
            "guarantee_met": self.guarantee_met,
            "bound_consistent": self.bound_consistent,
            "premise_failure": self.premise_failure,
            "consistency": self.consistency,
        }


def bound_report(qpir: QpirProtocol,
                 rank_tol: float = DEFAULT_RANK_TOL) -> BoundReport:
    """Run the whole reduction and audit every claim it rests on."""
    rae = build_rae(qpir, rank_tol=rank_tol)
    privacy: PrivacyReport = privacy_epsilon_purified(qpir)
    eps = privacy.epsilon_by_reference[0]
    delta_avg = rae.correctness.delta_avg
    per_index, p_avg = recovery_rates(rae)

    g = guarantee_value(delta_avg, eps)
    bound = lower_bound(rae.n, delta_avg, eps)
    nayak = nayak_check(rae.n, rae.m, p_avg)
    premise_ok = eps <= PRIVACY_PREMISE_MAX + 1e-9
    vacuous = g < 0.5
    guarantee_met = (p_avg >= g - 1e-6) if premise_ok else None
    bound_consistent = (rae.communication >= bound - 1e-6) if premise_ok else None
    premise_failure = None if premise_ok else "privacy"
    if premise_ok:
        consistency = "bound-applies" if bound_consistent else "BOUND-VIOLATED"
    else:
        consistency = ("consistent-because-non-private"
                       if rae.communication < rae.n else "non-private")
    return BoundReport(
        n=rae.n,
        communication=rae.communication,
        m=rae.m,
        m_ceil=rae.m_ceil,
        compressed_dim=rae.compressed_dim,
        delta_avg=delta_avg,
        delta_max=rae.correctness.delta_max,
        deltas=rae.correctness.deltas,
        epsilon_used=eps,
        epsilon_min=privacy.epsilon_hat,
        recovery_avg=p_avg,
        recovery_per_index=per_index,
        guarantee=g,
        bound_value=bound,
        nayak=nayak,
        rotation_distances=rae.rotation_distances,
        marginal_distances=rae.marginal_distances,
        privacy_premise_ok=premise_ok,
        guarantee_vacuous=vacuous,
        guarantee_met=guarantee_met,
        bound_consistent=bound_consistent,
        premise_failure=premise_failure,
        consistency=consistency,
    )


# ---------------------------------------------------------------------------
# superposition-database attack
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttackReport:
    """How well the purified server distinguishes index inputs when handed
    the database superposition."""

    n: int
    communication: float
    distance_matrix: np.ndarray
    max_pairwise: float
    pairwise_lower: float
    guess_probability: float
    verdict: str
    privacy_premise_holds: bool
    sublinear: bool
    consistency: str

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "communication": self.communication,
            "distance_matrix": [list(map(float, row))
                                for row in self.distance_matrix],
            "max_pairwise": self.max_pairwise,
            "pairwise_lower": self.pairwise_lower,
            "guess_probability": self.guess_probability,
            "verdict": self.verdict,
            "privacy_premise_holds": self.privacy_premise_holds,
            "sublinear": self.sublinear,
            "consistency": self.consistency,
        }


def superposition_attack(qpir: QpirProtocol) -> AttackReport:
    """Feed the purified server the uniform database superposition and see
    how well its final marginal reveals the client's index."""
    n = qpir.n
    margs = server_marginals(qpir, None)
    dist = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            dist[a, b] = dist[b, a] = trace_distance_matrices(margs[a], margs[b])
    max_pair = float(np.max(dist)) if n > 1 else 0.0
    guess = min(1.0, 0.5 + 0.5 * max_pair)
    if max_pair >= 1.0 - 1e-9:
        verdict = "NOT-PRIVATE"
    elif max_pair > 1e-9:
        verdict = "LEAKY"
    else:
        verdict = "PRIVATE"
    c = communication_complexity(qpir.spec)
    eps_replay = float(min(np.max(dist[:, j]) for j in range(n)))
    premise = eps_replay <= PRIVACY_PREMISE_MAX + 1e-9
    sublinear = c < n - 1e-9
    if sublinear and not premise:
        consistency = "consistent-because-non-private"
    elif sublinear:
        consistency = "SUBLINEAR-AND-PRIVATE"
    else:
        consistency = "bound-respected"
    dist.setflags(write=False)
    return AttackReport(
        n=n,
        communication=c,
        distance_matrix=dist,
        max_pairwise=max_pair,
        pairwise_lower=max_pair / 2.0,
        guess_probability=guess,
        verdict=verdict,
        privacy_premise_holds=premise,
        sublinear=sublinear,
        consistency=consistency,
    )
