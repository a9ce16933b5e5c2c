"""Adversary strategies and certification of (ultimate) speciousness.

An adversary replaces one party's operations, using whatever memory spaces
it likes but the host protocol's communication spaces.  It is certified
gamma-specious *on a finite input suite* against supplied recovery maps:
the existential over all recovery maps and all inputs is not searched.
Purified adversaries come with analytic trace-out recovery maps and are the
only ones the main reduction needs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ShapeMismatch
from .registers import Register, RegisterLayout, concat
from .states import (
    Isometry,
    KrausChannel,
    Operation,
    State,
    StateVector,
    apply_channel,
    permute_registers,
    to_density,
)
from .linalg import trace_distance_matrices
from .protocol import ProtocolSpec, Transcript, execute, purify_party


@dataclass(frozen=True)
class AdversaryStrategy:
    """One party's replacement operations with private memory spaces.

    memory[0] must equal the host's input space for that party; memory[k]
    is the adversary's state space after its k-th operation.  gamma is a
    claimed speciousness level, carried as metadata only.
    """

    party: str
    memory: tuple[RegisterLayout, ...]
    operations: tuple[Operation, ...]
    gamma: float | None = None

    def __post_init__(self) -> None:
        if self.party not in ("A", "B"):
            raise ShapeMismatch(f"party must be 'A' or 'B', got {self.party!r}")
        if len(self.memory) != len(self.operations) + 1:
            raise ShapeMismatch("need one memory layout per operation plus the input")
        if self.gamma is not None and self.gamma < 0:
            raise ShapeMismatch(f"gamma must be >= 0, got {self.gamma}")


def install(spec: ProtocolSpec, adv: AdversaryStrategy) -> ProtocolSpec:
    """Substitute the adversary's operations into the protocol.

    The honest party is untouched; shape problems surface with the
    offending round index via the spec's own validation.
    """
    if len(adv.operations) != spec.rounds:
        raise ShapeMismatch(
            f"adversary has {len(adv.operations)} operations, protocol has "
            f"{spec.rounds} rounds"
        )
    host_input = spec.memory(adv.party)[0]
    if adv.memory[0] != host_input:
        raise ShapeMismatch(
            f"adversary input space {adv.memory[0].registers} != host "
            f"{host_input.registers}"
        )
    if adv.party == "A":
        return ProtocolSpec(spec.rounds, adv.memory, spec.b_memory, spec.x_comm,
                            spec.y_comm, adv.operations, spec.b_ops)
    return ProtocolSpec(spec.rounds, spec.a_memory, adv.memory, spec.x_comm,
                        spec.y_comm, spec.a_ops, adv.operations)


def honest_adversary(spec: ProtocolSpec, party: str) -> AdversaryStrategy:
    return AdversaryStrategy(party, spec.memory(party), spec.ops(party), gamma=0.0)


def purified_adversary(spec: ProtocolSpec, party: str) -> AdversaryStrategy:
    """The canonical purification of one party, a 0-specious adversary."""
    pure = purify_party(spec, party)
    return AdversaryStrategy(party, pure.memory(party), pure.ops(party), gamma=0.0)


# ---------------------------------------------------------------------------
# recovery maps
# ---------------------------------------------------------------------------

def recovery_shapes(spec: ProtocolSpec, adv: AdversaryStrategy,
                    step: int) -> tuple[RegisterLayout, RegisterLayout]:
    """Required (input, output) layouts of the step-`step` recovery map.

    The map sends the adversary's memory to the honest memory; on steps
    where the adversary has just emitted a message, the still-in-flight
    communication register rides along untouched in the type.
    """
    s = spec.rounds
    k = (step + 1) // 2
    if adv.party == "A":
        if step % 2 == 1:
            return (concat(adv.memory[k], spec.x_comm[k - 1]),
                    concat(spec.a_memory[k], spec.x_comm[k - 1]))
        return adv.memory[k], spec.a_memory[k]
    if step % 2 == 1:
        return adv.memory[k - 1], spec.b_memory[k - 1]
    if k == s:
        return adv.memory[s], spec.b_memory[s]
    return (concat(adv.memory[k], spec.y_comm[k - 1]),
            concat(spec.b_memory[k], spec.y_comm[k - 1]))


@dataclass(frozen=True)
class RecoveryMapSet:
    """Per-step maps F_1..F_2s taking the adversary's view to the honest one."""

    maps: tuple[Operation, ...]

    def validate(self, spec: ProtocolSpec, adv: AdversaryStrategy) -> None:
        if len(self.maps) != 2 * spec.rounds:
            raise ShapeMismatch(
                f"need {2 * spec.rounds} recovery maps, got {len(self.maps)}"
            )
        for i, op in enumerate(self.maps, start=1):
            expect_in, expect_out = recovery_shapes(spec, adv, i)
            if op.input_layout != expect_in or op.output_layout != expect_out:
                raise ShapeMismatch(
                    f"recovery map {i}: ({op.input_layout.registers} -> "
                    f"{op.output_layout.registers}) != expected "
                    f"({expect_in.registers} -> {expect_out.registers})"
                )


def identity_recovery(spec: ProtocolSpec, party: str) -> RecoveryMapSet:
    """Identity maps; certifies the honest strategy at epsilon 0."""
    adv = honest_adversary(spec, party)
    maps = []
    for i in range(1, 2 * spec.rounds + 1):
        lay_in, lay_out = recovery_shapes(spec, adv, i)
        maps.append(Isometry(lay_in, lay_out,
                             np.eye(lay_in.total_dim, dtype=np.complex128)))
    return RecoveryMapSet(tuple(maps))


def _trace_out_map(lay_in: RegisterLayout, drop: str) -> KrausChannel:
    """Channel tracing out one register of `lay_in` (Kraus rows <e|)."""
    pos = lay_in.position(drop)
    before = int(np.prod([r.dim for r in lay_in.registers[:pos]], initial=1))
    d = lay_in.dim_of(drop)
    after = int(np.prod([r.dim for r in lay_in.registers[pos + 1:]], initial=1))
    lay_out = lay_in.drop([drop])
    kraus = []
    for e in range(d):
        bra = np.zeros((1, d), dtype=np.complex128)
        bra[0, e] = 1.0
        kraus.append(np.kron(np.kron(np.eye(before), bra), np.eye(after)))
    return KrausChannel(lay_in, lay_out, tuple(kraus))


def trace_out_recovery(spec: ProtocolSpec, adv: AdversaryStrategy) -> RecoveryMapSet:
    """Recovery maps for a purified adversary: trace out its purifier register."""
    extra = [lb for lb in adv.memory[-1].labels()
             if lb not in spec.memory(adv.party)[-1]]
    if len(extra) != 1:
        raise ShapeMismatch(
            f"expected exactly one purifier register, found {extra}"
        )
    bar = extra[0]
    maps = []
    for i in range(1, 2 * spec.rounds + 1):
        lay_in, lay_out = recovery_shapes(spec, adv, i)
        if bar in lay_in:
            maps.append(_trace_out_map(lay_in, bar))
        else:
            maps.append(Isometry(lay_in, lay_out,
                                 np.eye(lay_in.total_dim, dtype=np.complex128)))
    return RecoveryMapSet(tuple(maps))


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CertificationRow:
    step: int
    input_id: str
    distance: float


@dataclass(frozen=True)
class CertificationReport:
    rows: tuple[CertificationRow, ...]
    epsilon_hat: float
    gamma: float | None
    certified: bool | None  # epsilon_hat <= gamma, when gamma was claimed

    def worst_by_step(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for row in self.rows:
            out[row.step] = max(out.get(row.step, 0.0), row.distance)
        return out


InputSuite = Sequence[tuple[str, State]]


def _named(inputs: Iterable) -> list[tuple[str, State]]:
    named = []
    for k, item in enumerate(inputs):
        if isinstance(item, tuple):
            named.append(item)
        else:
            named.append((f"input-{k}", item))
    return named


def _step_distance(honest: State, recovered) -> float:
    hon = to_density(honest)
    rec = permute_registers(recovered, hon.layout.labels())
    return trace_distance_matrices(hon.matrix, rec.matrix)


def certify_specious(spec: ProtocolSpec, adv: AdversaryStrategy,
                     recovery: RecoveryMapSet,
                     inputs: Iterable) -> CertificationReport:
    """Worst-case recovered-state distance over every step and input.

    The adversary is certified gamma-specious on this test suite iff the
    returned epsilon_hat is at most gamma; a finite suite can only
    under-approximate the quantifier over all input states.
    """
    recovery.validate(spec, adv)
    adv_spec = install(spec, adv)
    rows: list[CertificationRow] = []
    for input_id, rho_in in _named(inputs):
        honest: Transcript = execute(spec, rho_in)
        tilde: Transcript = execute(adv_spec, rho_in)
        for i in range(1, 2 * spec.rounds + 1):
            recovered = apply_channel(recovery.maps[i - 1],
                                      to_density(tilde.state(i)))
            dist = _step_distance(honest.state(i), recovered)
            rows.append(CertificationRow(i, input_id, dist))
    eps = max(row.distance for row in rows)
    gamma = adv.gamma
    return CertificationReport(tuple(rows), eps, gamma,
                               None if gamma is None else eps <= gamma + 1e-8)


def certify_ultimately_specious(spec: ProtocolSpec, adv: AdversaryStrategy,
                                recovery_map: Operation,
                                inputs: Iterable) -> CertificationReport:
    """Like certify_specious, restricted to the final state and a single map."""
    expect_in, expect_out = recovery_shapes(spec, adv, 2 * spec.rounds)
    if (recovery_map.input_layout != expect_in
            or recovery_map.output_layout != expect_out):
        raise ShapeMismatch(
            f"ultimate recovery map ({recovery_map.input_layout.registers} -> "
            f"{recovery_map.output_layout.registers}) != expected "
            f"({expect_in.registers} -> {expect_out.registers})"
        )
    adv_spec = install(spec, adv)
    rows: list[CertificationRow] = []
    last = 2 * spec.rounds
    for input_id, rho_in in _named(inputs):
        honest = execute(spec, rho_in)
        tilde = execute(adv_spec, rho_in)
        recovered = apply_channel(recovery_map, to_density(tilde.final))
        rows.append(CertificationRow(
            last, input_id, _step_distance(honest.final, recovered)
        ))
    eps = max(row.distance for row in rows)
    gamma = adv.gamma
    return CertificationReport(tuple(rows), eps, gamma,
                               None if gamma is None else eps <= gamma + 1e-8)


# ---------------------------------------------------------------------------
# default input suite
# ---------------------------------------------------------------------------

def default_input_suite(spec: ProtocolSpec) -> list[tuple[str, StateVector]]:
    """Basis products, uniform-database inputs per index, and one input
    maximally entangled with the reference register."""
    a0 = spec.a_memory[0]
    b0 = spec.b_memory[0]
    lay = concat(a0, b0)
    da, db = a0.total_dim, b0.total_dim
    suite: list[tuple[str, StateVector]] = []
    for a in range(da):
        for b in range(db):
            amps = np.zeros(lay.total_dim, dtype=np.complex128)
            amps[a * db + b] = 1.0
            suite.append((f"basis-a{a}-b{b}", StateVector(lay, amps)))
    for b in range(db):
        amps = np.zeros(lay.total_dim, dtype=np.complex128)
        amps[b::db] = 1.0 / np.sqrt(da)
        suite.append((f"uniform-i{b + 1}", StateVector(lay, amps)))
    d = da * db
    ref_lay = concat(lay, RegisterLayout((Register("R", d),)))
    amps = (np.eye(d, dtype=np.complex128) / np.sqrt(d)).reshape(-1)
    suite.append(("entangled-ref", StateVector(ref_lay, amps)))
    return suite
