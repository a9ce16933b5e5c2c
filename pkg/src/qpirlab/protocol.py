"""Two-party protocol engine.

A protocol alternates party-A and party-B operations for `s` rounds; A sends
the first and last messages, and the last round is only partial (B consumes
the final message without replying).  Execution tracks the global state after
every step, counts communication in qubits (log2 of communication-space
dimensions, fractional dims allowed), and can replace either party's
channels by their Stinespring dilations so the whole run stays pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LayoutError, ShapeMismatch
from .linalg import DEFAULT_RANK_TOL, haar_unitary_matrix, schmidt_rank
from .registers import Register, RegisterLayout, concat
from .states import (
    DensityOperator,
    Isometry,
    KrausChannel,
    Operation,
    State,
    StateVector,
    apply_channel,
    apply_isometry,
    as_single_isometry,
    permute_registers,
    pure_density,
)


def _op_name(party: str, k: int) -> str:
    return f"{party}{k}"


@dataclass(frozen=True)
class ProtocolSpec:
    """An s-round two-party protocol.

    Layout lists hold A_0..A_s, B_0..B_s, X_1..X_s, Y_1..Y_{s-1}; op `k` of
    party A maps A_{k-1} (x) Y_{k-1} -> A_k (x) X_k (round 1 has no incoming
    message), op `k` of party B maps B_{k-1} (x) X_k -> B_k (x) Y_k, and the
    final B op emits no message.
    """

    rounds: int
    a_memory: tuple[RegisterLayout, ...]
    b_memory: tuple[RegisterLayout, ...]
    x_comm: tuple[RegisterLayout, ...]
    y_comm: tuple[RegisterLayout, ...]
    a_ops: tuple[Operation, ...]
    b_ops: tuple[Operation, ...]

    def __post_init__(self) -> None:
        s = self.rounds
        if s < 1:
            raise ShapeMismatch(f"need at least one round, got {s}")
        sizes = (len(self.a_memory), len(self.b_memory), len(self.x_comm),
                 len(self.y_comm), len(self.a_ops), len(self.b_ops))
        if sizes != (s + 1, s + 1, s, s - 1, s, s):
            raise ShapeMismatch(
                f"layout/op list lengths {sizes} inconsistent with s={s}"
            )
        for k in range(1, s + 1):
            self._check_op("A", k, self.a_ops[k - 1],
                           self.expected_a_input(k), self.expected_a_output(k))
            self._check_op("B", k, self.b_ops[k - 1],
                           self.expected_b_input(k), self.expected_b_output(k))
        for step in range(1, 2 * s + 1):
            labels = _canonical_order(self, step, RegisterLayout(()))
            if len(set(labels)) != len(labels):
                raise ShapeMismatch(
                    f"registers alive after step {step} have clashing labels: {labels}"
                )

    @staticmethod
    def _check_op(party: str, k: int, op: Operation,
                  expect_in: RegisterLayout, expect_out: RegisterLayout) -> None:
        if op.input_layout != expect_in:
            raise ShapeMismatch(
                f"op {_op_name(party, k)}: input layout "
                f"{op.input_layout.registers} != expected {expect_in.registers}"
            )
        if op.output_layout != expect_out:
            raise ShapeMismatch(
                f"op {_op_name(party, k)}: output layout "
                f"{op.output_layout.registers} != expected {expect_out.registers}"
            )

    def expected_a_input(self, k: int) -> RegisterLayout:
        if k == 1:
            return self.a_memory[0]
        return concat(self.a_memory[k - 1], self.y_comm[k - 2])

    def expected_a_output(self, k: int) -> RegisterLayout:
        return concat(self.a_memory[k], self.x_comm[k - 1])

    def expected_b_input(self, k: int) -> RegisterLayout:
        return concat(self.b_memory[k - 1], self.x_comm[k - 1])

    def expected_b_output(self, k: int) -> RegisterLayout:
        if k == self.rounds:
            return self.b_memory[k]
        return concat(self.b_memory[k], self.y_comm[k - 1])

    def memory(self, party: str) -> tuple[RegisterLayout, ...]:
        if party == "A":
            return self.a_memory
        if party == "B":
            return self.b_memory
        raise ValueError(f"party must be 'A' or 'B', got {party!r}")

    def ops(self, party: str) -> tuple[Operation, ...]:
        return self.a_ops if party == "A" else self.b_ops

    def all_unitary(self) -> bool:
        return all(as_single_isometry(op) is not None
                   for op in self.a_ops + self.b_ops)


def communication_complexity(spec: ProtocolSpec) -> float:
    """Total qubits exchanged: sum of log2 of all communication dimensions."""
    total = 0.0
    for lay in spec.x_comm + spec.y_comm:
        total += math.log2(lay.total_dim)
    return total


@dataclass(frozen=True)
class Transcript:
    """Input plus the global state after each of the 2s steps."""

    spec: ProtocolSpec
    rho_in: State
    states: tuple[State, ...]

    def state(self, i: int) -> State:
        """State after step i (1-indexed, i in 1..2s)."""
        return self.states[i - 1]

    @property
    def final(self) -> State:
        return self.states[-1]


def _spectator_layout(spec: ProtocolSpec, rho_in: State) -> RegisterLayout:
    """Validate the input layout and return the inert trailing registers.

    Inputs are A_0 ++ B_0 optionally followed by one reference register of
    dimension 1 or dim(A_0)*dim(B_0).  The reference register is never
    touched by any operation.
    """
    front = concat(spec.a_memory[0], spec.b_memory[0])
    regs = rho_in.layout.registers
    nf = len(front)
    if regs[:nf] != front.registers:
        raise ShapeMismatch(
            f"input layout {regs} must start with A_0 ++ B_0 = {front.registers}"
        )
    rest = regs[nf:]
    if len(rest) > 1:
        raise ShapeMismatch(f"at most one reference register allowed, got {rest}")
    if rest:
        allowed = {1, front.total_dim}
        if rest[0].dim not in allowed:
            raise ShapeMismatch(
                f"reference register dim {rest[0].dim} not in {sorted(allowed)}"
            )
    return RegisterLayout(tuple(rest))


def _canonical_order(spec: ProtocolSpec, step: int,
                     spectators: RegisterLayout) -> tuple[str, ...]:
    s = spec.rounds
    k = (step + 1) // 2
    if step % 2 == 1:  # A just acted; X_k in flight
        order = (spec.a_memory[k].labels() + spec.x_comm[k - 1].labels()
                 + spec.b_memory[k - 1].labels())
    elif k < s:  # B acted; Y_k in flight
        order = (spec.a_memory[k].labels() + spec.b_memory[k].labels()
                 + spec.y_comm[k - 1].labels())
    else:  # final state
        order = spec.a_memory[s].labels() + spec.b_memory[s].labels()
    return order + spectators.labels()


def execute(spec: ProtocolSpec, rho_in: State) -> Transcript:
    """Run the protocol, returning every intermediate global state.

    Pure inputs stay vectors as long as every operation is an isometry;
    otherwise the run proceeds on density operators.
    """
    spectators = _spectator_layout(spec, rho_in)
    isos = [as_single_isometry(op) for op in spec.a_ops + spec.b_ops]
    cur: State = rho_in
    if isinstance(cur, StateVector) and any(iso is None for iso in isos):
        cur = pure_density(cur)

    states: list[State] = []
    s = spec.rounds
    for k in range(1, s + 1):
        for party, op in (("A", spec.a_ops[k - 1]), ("B", spec.b_ops[k - 1])):
            iso = as_single_isometry(op)
            try:
                if isinstance(cur, StateVector):
                    cur = apply_isometry(iso, cur)
                else:
                    cur = apply_channel(op, cur)
            except LayoutError as exc:
                raise ShapeMismatch(
                    f"op {_op_name(party, k)} failed to apply: {exc}"
                ) from exc
            step = 2 * k - 1 if party == "A" else 2 * k
            cur = permute_registers(cur, _canonical_order(spec, step, spectators))
            states.append(cur)
    return Transcript(spec, rho_in, tuple(states))


def execute_pure_batch(spec: ProtocolSpec, input_layout: RegisterLayout,
                       columns: np.ndarray) -> tuple[RegisterLayout, np.ndarray]:
    """Run many pure inputs at once through an all-isometry protocol.

    `columns` holds one input amplitude vector per column.  Only the final
    states are returned, as columns over the canonical final layout
    (A_s registers, B_s registers, then any spectators).  This is the hot
    path behind correctness/privacy sweeps, where one big matmul per round
    beats thousands of small ones.
    """
    if not spec.all_unitary():
        raise LayoutError("batched execution requires an all-isometry protocol")
    front_check = concat(spec.a_memory[0], spec.b_memory[0])
    nf = len(front_check)
    if input_layout.registers[:nf] != front_check.registers:
        raise ShapeMismatch(
            f"batch input layout {input_layout.registers} must start with "
            f"A_0 ++ B_0 = {front_check.registers}"
        )
    spectators = RegisterLayout(input_layout.registers[nf:])

    nb = columns.shape[1]
    lay = input_layout
    cur = columns
    s = spec.rounds
    order = [op for k in range(s)
             for op in (spec.a_ops[k], spec.b_ops[k])]
    for op in order:
        iso = as_single_isometry(op)
        front = [lay.position(lb) for lb in iso.input_layout.labels()]
        rest = [k for k in range(len(lay)) if k not in front]
        dims = lay.dims()
        t = cur.reshape(dims + (nb,)).transpose(front + rest + [len(dims)])
        din = iso.input_layout.total_dim
        out = iso.matrix @ t.reshape(din, -1)
        rest_lay = RegisterLayout(tuple(lay.registers[k] for k in rest))
        lay = concat(iso.output_layout, rest_lay)
        cur = out
    final_order = _canonical_order(spec, 2 * s, spectators)
    perm = [lay.position(lb) for lb in final_order]
    dims = lay.dims()
    cur = cur.reshape(dims + (nb,)).transpose(perm + [len(dims)])
    final_lay = lay.reordered(final_order)
    return final_lay, cur.reshape(final_lay.total_dim, nb)


# ---------------------------------------------------------------------------
# purification (Stinespring dilation per round, purifier accumulated in one
# growing register inside the party's memory)
# ---------------------------------------------------------------------------

def _reindex(dims: tuple[int, ...], order: tuple[int, ...]) -> np.ndarray:
    """Index array g with x_new = x_old[g] when factors are reordered."""
    return np.arange(int(np.prod(dims))).reshape(dims).transpose(order).reshape(-1)


def _fresh_label(base: str, taken: set[str]) -> str:
    label = base
    while label in taken:
        label += "_"
    return label


def _dilate_op(op: Operation, bar_prev: int,
               mem_in: RegisterLayout, comm_in: RegisterLayout,
               mem_out: RegisterLayout, comm_out: RegisterLayout,
               bar_label: str, first_round: bool) -> tuple[Isometry, int]:
    kraus = [op.matrix] if isinstance(op, Isometry) else list(op.kraus_ops)
    m = len(kraus)
    dm, dc = mem_in.total_dim, comm_in.total_dim
    dmo, dco = mem_out.total_dim, comm_out.total_dim
    # V: flat output (mem_out, comm_out, env) <- flat input (mem_in, comm_in)
    v = np.stack(kraus, axis=0).transpose(1, 0, 2).reshape(dmo * dco * m, dm * dc)

    if first_round:
        full = v[_reindex((dmo, dco, m), (0, 2, 1)), :]  # out: (mem, env, comm)
        bar_new = m
    else:
        core = np.kron(v, np.eye(bar_prev))
        # input factors currently (mem, comm, bar) -> accept (mem, bar, comm)
        g_in = _reindex((dm, dc, bar_prev), (0, 2, 1))
        # output factors (mem, comm, env, bar) -> (mem, bar, env, comm)
        g_out = _reindex((dmo, dco, m, bar_prev), (0, 3, 2, 1))
        full = core[g_out, :][:, g_in]
        bar_new = bar_prev * m

    in_regs = mem_in.registers
    if not first_round:
        in_regs = in_regs + (Register(bar_label, bar_prev),)
    in_lay = RegisterLayout(in_regs + comm_in.registers)
    out_lay = RegisterLayout(
        mem_out.registers + (Register(bar_label, bar_new),) + comm_out.registers
    )
    return Isometry(in_lay, out_lay, full), bar_new


def purify_party(spec: ProtocolSpec, party: str) -> ProtocolSpec:
    """Replace one party's channels by Stinespring isometries.

    The purifying registers accumulate in a single register inside that
    party's memory; tracing it out of any intermediate state reproduces the
    original run's state.  Already-unitary rounds get a dimension-1
    purifier, so behavior is unchanged.
    """
    if party not in ("A", "B"):
        raise ValueError(f"party must be 'A' or 'B', got {party!r}")
    s = spec.rounds
    mems = spec.memory(party)
    ops = spec.ops(party)
    taken = set()
    for lay in spec.a_memory + spec.b_memory + spec.x_comm + spec.y_comm:
        taken.update(lay.labels())
    bar_label = _fresh_label("Abar" if party == "A" else "Bbar", taken)

    comm_in = ((RegisterLayout(()),) + spec.y_comm if party == "A"
               else spec.x_comm)
    comm_out = (spec.x_comm if party == "A"
                else spec.y_comm + (RegisterLayout(()),))

    new_ops: list[Operation] = []
    new_mems: list[RegisterLayout] = [mems[0]]
    bar = 1
    for k in range(1, s + 1):
        dilated, bar = _dilate_op(
            ops[k - 1], bar, mems[k - 1], comm_in[k - 1],
            mems[k], comm_out[k - 1], bar_label, first_round=(k == 1),
        )
        new_ops.append(dilated)
        new_mems.append(RegisterLayout(
            mems[k].registers + (Register(bar_label, bar),)
        ))

    if party == "A":
        return ProtocolSpec(s, tuple(new_mems), spec.b_memory, spec.x_comm,
                            spec.y_comm, tuple(new_ops), spec.b_ops)
    return ProtocolSpec(s, spec.a_memory, tuple(new_mems), spec.x_comm,
                        spec.y_comm, spec.a_ops, tuple(new_ops))


def purify_both(spec: ProtocolSpec) -> ProtocolSpec:
    return purify_party(purify_party(spec, "A"), "B")


def purifier_labels(spec: ProtocolSpec, purified: ProtocolSpec) -> tuple[str, ...]:
    """Labels present in the purified spec's final memories but not the original's."""
    orig = set(spec.a_memory[-1].labels() + spec.b_memory[-1].labels())
    now = purified.a_memory[-1].labels() + purified.b_memory[-1].labels()
    return tuple(lb for lb in now if lb not in orig)


# ---------------------------------------------------------------------------
# seeded random protocols (fully unitary, power-of-two dimensions)
# ---------------------------------------------------------------------------

def random_protocol(seed: int, rounds: int, qubit_budget: int) -> ProtocolSpec:
    """Haar-random fully-unitary protocol with the given total communication.

    The budget (in qubits) is split at random over the 2s-1 communication
    registers; memory dimensions are chosen so every round is square.
    """
    if rounds < 1:
        raise ShapeMismatch(f"need at least one round, got {rounds}")
    if qubit_budget < 0:
        raise LayoutError(f"infeasible budget split: budget {qubit_budget} < 0")
    rng = np.random.default_rng(seed)
    s = rounds
    slots = 2 * s - 1
    cx = [0] * s
    cy = [0] * (s - 1)
    for _ in range(qubit_budget):
        j = int(rng.integers(0, slots))
        if j < s:
            cx[j] += 1
        else:
            cy[j - s] += 1

    alpha = [0] * (s + 1)
    for k in range(s, 0, -1):
        alpha[k - 1] = alpha[k] + cx[k - 1] - (cy[k - 2] if k >= 2 else 0)
    shift = max(0, -min(alpha))
    alpha = [a + shift for a in alpha]

    beta = [0] * (s + 1)
    for k in range(1, s + 1):
        beta[k] = beta[k - 1] + cx[k - 1] - (cy[k - 1] if k < s else 0)
    shift = max(0, -min(beta))
    beta = [b + shift for b in beta]

    a_mem = tuple(RegisterLayout((Register(f"A{k}", 2 ** alpha[k]),))
                  for k in range(s + 1))
    b_mem = tuple(RegisterLayout((Register(f"B{k}", 2 ** beta[k]),))
                  for k in range(s + 1))
    x_comm = tuple(RegisterLayout((Register(f"X{k + 1}", 2 ** cx[k]),))
                   for k in range(s))
    y_comm = tuple(RegisterLayout((Register(f"Y{k + 1}", 2 ** cy[k]),))
                   for k in range(s - 1))

    spec_dims = dict(rounds=s, a_memory=a_mem, b_memory=b_mem,
                     x_comm=x_comm, y_comm=y_comm)

    a_ops = []
    b_ops = []
    for k in range(1, s + 1):
        din = a_mem[k - 1].total_dim * (y_comm[k - 2].total_dim if k >= 2 else 1)
        lin = a_mem[0] if k == 1 else concat(a_mem[k - 1], y_comm[k - 2])
        lout = concat(a_mem[k], x_comm[k - 1])
        a_ops.append(Isometry(lin, lout, haar_unitary_matrix(din, rng)))
        din = b_mem[k - 1].total_dim * x_comm[k - 1].total_dim
        lin = concat(b_mem[k - 1], x_comm[k - 1])
        lout = b_mem[k] if k == s else concat(b_mem[k], y_comm[k - 1])
        b_ops.append(Isometry(lin, lout, haar_unitary_matrix(din, rng)))

    return ProtocolSpec(a_ops=tuple(a_ops), b_ops=tuple(b_ops), **spec_dims)


def product_input(spec: ProtocolSpec, seed: int | None = None) -> StateVector:
    """Pure product input on A_0 (x) B_0 (|0...0> or Haar-random local states)."""
    lay = concat(spec.a_memory[0], spec.b_memory[0])
    if seed is None:
        amps = np.zeros(lay.total_dim, dtype=np.complex128)
        amps[0] = 1.0
        return StateVector(lay, amps)
    rng = np.random.default_rng(seed)
    parts = []
    for d in (spec.a_memory[0].total_dim, spec.b_memory[0].total_dim):
        v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        parts.append(v / np.linalg.norm(v))
    return StateVector(lay, np.kron(parts[0], parts[1]))


# ---------------------------------------------------------------------------
# stepwise Schmidt-rank audit across the party cut
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RankEvent:
    step: str          # "A3", "B1", "handover X2", ...
    cut: tuple[str, ...]
    rank: int
    bound: int         # allowed rank after this event
    ok: bool


def rank_trace(spec: ProtocolSpec, psi_in: StateVector,
               rank_tol: float = DEFAULT_RANK_TOL) -> list[RankEvent]:
    """Audit how the Schmidt rank across the A/B cut grows step by step.

    Local operations must preserve the running rank; moving a communication
    register of dimension d across the cut may multiply it by at most d
    (one transmitted qubit at most doubles it).
    """
    if not spec.all_unitary():
        raise LayoutError("rank trace requires an all-isometry protocol")
    if len(psi_in.layout) != len(concat(spec.a_memory[0], spec.b_memory[0])):
        raise LayoutError("rank trace requires an input without reference registers")

    events: list[RankEvent] = []
    running = schmidt_rank(psi_in, spec.a_memory[0].labels(), rank_tol)
    cur = psi_in
    s = spec.rounds
    for k in range(1, s + 1):
        cur = apply_isometry(as_single_isometry(spec.a_ops[k - 1]), cur)
        a_side = spec.a_memory[k].labels()
        x_label = spec.x_comm[k - 1].labels()
        r = schmidt_rank(cur, a_side + x_label, rank_tol)
        events.append(RankEvent(f"A{k}", a_side + x_label, r, running, r <= running))
        dim_x = spec.x_comm[k - 1].total_dim
        r = schmidt_rank(cur, a_side, rank_tol)
        events.append(RankEvent(f"handover X{k}", a_side, r,
                                running * dim_x, r <= running * dim_x))
        running = r
        cur = apply_isometry(as_single_isometry(spec.b_ops[k - 1]), cur)
        r = schmidt_rank(cur, a_side, rank_tol)
        events.append(RankEvent(f"B{k}", a_side, r, running, r <= running))
        if k < s:
            dim_y = spec.y_comm[k - 1].total_dim
            cut = a_side + spec.y_comm[k - 1].labels()
            r = schmidt_rank(cur, cut, rank_tol)
            events.append(RankEvent(f"handover Y{k}", cut, r,
                                    running * dim_y, r <= running * dim_y))
            running = r
    return events
