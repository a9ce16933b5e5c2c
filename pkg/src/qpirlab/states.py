"""State and operator value types over labeled register layouts.

Everything is an immutable dense complex array plus a layout.  Application
helpers address tensor factors by label, so callers never juggle axis
permutations by hand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import LayoutError, LayoutMismatch, NotPositiveSemidefinite
from .registers import RegisterLayout, concat

ATOL_NORM = 1e-9
ATOL_HERMITIAN = 1e-9
ATOL_EIGENVALUE = 1e-9
ATOL_ISOMETRY = 1e-9
ATOL_TRACE_PRESERVING = 1e-8


def _frozen_array(values, shape=None) -> np.ndarray:
    arr = np.array(values, dtype=np.complex128, order="C")
    if shape is not None and arr.shape != shape:
        raise LayoutError(f"array shape {arr.shape} != expected {shape}")
    if not np.all(np.isfinite(arr.view(np.float64))):
        raise LayoutError("array contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit vector over a register layout."""

    layout: RegisterLayout
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = _frozen_array(self.amplitudes, shape=(self.layout.total_dim,))
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > ATOL_NORM:
            raise LayoutError(f"state vector norm {norm} is not 1 within {ATOL_NORM}")
        object.__setattr__(self, "amplitudes", amps)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims())

    def __eq__(self, other) -> bool:
        return (isinstance(other, StateVector) and self.layout == other.layout
                and np.array_equal(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, PSD, trace-one operator over a register layout."""

    layout: RegisterLayout
    matrix: np.ndarray

    def __post_init__(self) -> None:
        d = self.layout.total_dim
        mat = _frozen_array(self.matrix, shape=(d, d))
        if np.max(np.abs(mat - mat.conj().T)) > ATOL_HERMITIAN:
            raise LayoutError("density matrix is not Hermitian within tolerance")
        tr = complex(np.trace(mat))
        if abs(tr - 1.0) > ATOL_NORM:
            raise LayoutError(f"density matrix trace {tr} is not 1 within {ATOL_NORM}")
        lo = float(np.min(np.linalg.eigvalsh(mat)))
        if lo < -ATOL_EIGENVALUE:
            raise NotPositiveSemidefinite(
                f"density matrix has eigenvalue {lo} < -{ATOL_EIGENVALUE}"
            )
        object.__setattr__(self, "matrix", mat)

    def __eq__(self, other) -> bool:
        return (isinstance(other, DensityOperator) and self.layout == other.layout
                and np.array_equal(self.matrix, other.matrix))


@dataclass(frozen=True, eq=False)
class Isometry:
    """Column-orthonormal map between layouts; square ones are unitaries."""

    input_layout: RegisterLayout
    output_layout: RegisterLayout
    matrix: np.ndarray

    def __post_init__(self) -> None:
        din = self.input_layout.total_dim
        dout = self.output_layout.total_dim
        if dout < din:
            raise LayoutError(
                f"isometry output dim {dout} smaller than input dim {din}"
            )
        mat = _frozen_array(self.matrix, shape=(dout, din))
        gram = mat.conj().T @ mat
        if np.max(np.abs(gram - np.eye(din))) > ATOL_ISOMETRY:
            raise LayoutError("isometry columns are not orthonormal within tolerance")
        object.__setattr__(self, "matrix", mat)

    @property
    def is_unitary(self) -> bool:
        return self.input_layout.total_dim == self.output_layout.total_dim

    def __eq__(self, other) -> bool:
        return (isinstance(other, Isometry)
                and self.input_layout == other.input_layout
                and self.output_layout == other.output_layout
                and np.array_equal(self.matrix, other.matrix))


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Trace-preserving completely positive map given by Kraus operators."""

    input_layout: RegisterLayout
    output_layout: RegisterLayout
    kraus_ops: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.kraus_ops) == 0:
            raise LayoutError("channel needs at least one Kraus operator")
        din = self.input_layout.total_dim
        dout = self.output_layout.total_dim
        ops = tuple(_frozen_array(k, shape=(dout, din)) for k in self.kraus_ops)
        total = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(total - np.eye(din))) > ATOL_TRACE_PRESERVING:
            raise LayoutError("Kraus operators do not sum to the identity (not TP)")
        object.__setattr__(self, "kraus_ops", ops)

    def __eq__(self, other) -> bool:
        return (isinstance(other, KrausChannel)
                and self.input_layout == other.input_layout
                and self.output_layout == other.output_layout
                and len(self.kraus_ops) == len(other.kraus_ops)
                and all(np.array_equal(a, b)
                        for a, b in zip(self.kraus_ops, other.kraus_ops)))


Operation = Union[Isometry, KrausChannel]
State = Union[StateVector, DensityOperator]


def as_single_isometry(op: Operation) -> Isometry | None:
    """View `op` as an isometry when possible (enables pure-state runs)."""
    if isinstance(op, Isometry):
        return op
    if len(op.kraus_ops) == 1:
        k = op.kraus_ops[0]
        gram = k.conj().T @ k
        if np.max(np.abs(gram - np.eye(k.shape[1]))) <= ATOL_ISOMETRY:
            return Isometry(op.input_layout, op.output_layout, k)
    return None


# ---------------------------------------------------------------------------
# construction helpers
# ---------------------------------------------------------------------------

def basis_state(layout: RegisterLayout, index: int) -> StateVector:
    """Computational basis vector |index> on the whole layout."""
    d = layout.total_dim
    if not 0 <= index < d:
        raise LayoutError(f"basis index {index} outside [0, {d})")
    amps = np.zeros(d, dtype=np.complex128)
    amps[index] = 1.0
    return StateVector(layout, amps)


def uniform_state(layout: RegisterLayout) -> StateVector:
    d = layout.total_dim
    return StateVector(layout, np.full(d, 1.0 / np.sqrt(d), dtype=np.complex128))


def tensor(*states: StateVector) -> StateVector:
    amps = states[0].amplitudes
    lay = states[0].layout
    for s in states[1:]:
        amps = np.kron(amps, s.amplitudes)
        lay = concat(lay, s.layout)
    return StateVector(lay, amps)


def pure_density(state: StateVector) -> DensityOperator:
    amps = state.amplitudes
    return DensityOperator(state.layout, np.outer(amps, amps.conj()))


def to_density(state: State) -> DensityOperator:
    return state if isinstance(state, DensityOperator) else pure_density(state)


# ---------------------------------------------------------------------------
# label-addressed tensor algebra
# ---------------------------------------------------------------------------

def _front_positions(layout: RegisterLayout, labels: Sequence[str]) -> tuple[list[int], list[int]]:
    front = [layout.position(lb) for lb in labels]
    rest = [k for k in range(len(layout)) if k not in front]
    return front, rest


def permute_registers(state: State, label_order: Sequence[str]) -> State:
    """Reorder tensor factors to `label_order` (a permutation of the labels)."""
    lay = state.layout
    if tuple(label_order) == lay.labels():
        return state
    new_lay = lay.reordered(label_order)
    perm = [lay.position(lb) for lb in label_order]
    if isinstance(state, StateVector):
        t = state.tensor().transpose(perm)
        return StateVector(new_lay, t.reshape(-1))
    dims = lay.dims()
    n = len(dims)
    t = state.matrix.reshape(dims + dims)
    t = t.transpose(perm + [n + p for p in perm])
    d = lay.total_dim
    return DensityOperator(new_lay, t.reshape(d, d))


def _check_factor(layout: RegisterLayout, wanted: RegisterLayout) -> None:
    for lb in wanted.labels():
        if lb not in layout:
            raise LayoutMismatch(
                f"state lacks register {lb!r}; has {layout.labels()}"
            )
        if layout.dim_of(lb) != wanted.dim_of(lb):
            raise LayoutMismatch(
                f"register {lb!r} has dim {layout.dim_of(lb)}, "
                f"operation expects {wanted.dim_of(lb)}"
            )


def apply_isometry(op: Isometry, state: StateVector) -> StateVector:
    """Apply `op` to the factors named by its input layout; output registers
    land at the front, untouched registers keep their relative order."""
    lay = state.layout
    _check_factor(lay, op.input_layout)
    front, rest = _front_positions(lay, op.input_layout.labels())
    t = state.tensor().transpose(front + rest)
    din = op.input_layout.total_dim
    mat = t.reshape(din, -1)
    out = op.matrix @ mat
    rest_lay = RegisterLayout(tuple(lay.registers[k] for k in rest))
    new_lay = concat(op.output_layout, rest_lay)
    return StateVector(new_lay, out.reshape(-1))


def apply_channel(op: Operation, rho: DensityOperator) -> DensityOperator:
    """Apply a channel (or isometry) to the factors named by its input layout."""
    kraus = (op.matrix,) if isinstance(op, Isometry) else op.kraus_ops
    lay = rho.layout
    _check_factor(lay, op.input_layout)
    front, rest = _front_positions(lay, op.input_layout.labels())
    dims = lay.dims()
    n = len(dims)
    perm = front + rest
    t = rho.matrix.reshape(dims + dims).transpose(perm + [n + p for p in perm])
    din = op.input_layout.total_dim
    drest = lay.total_dim // din
    t = t.reshape(din, drest, din, drest)
    dout = op.output_layout.total_dim
    acc = np.zeros((dout, drest, dout, drest), dtype=np.complex128)
    for k in kraus:
        acc += np.einsum("xi,iajb,yj->xayb", k, t, k.conj(), optimize=True)
    rest_lay = RegisterLayout(tuple(lay.registers[k] for k in rest))
    new_lay = concat(op.output_layout, rest_lay)
    d = new_lay.total_dim
    return DensityOperator(new_lay, acc.reshape(d, d))


def apply_operation(op: Operation, state: State) -> State:
    """Dispatch to the pure or mixed application; pure inputs stay pure only
    under isometries."""
    if isinstance(state, StateVector):
        iso = as_single_isometry(op)
        if iso is not None:
            return apply_isometry(iso, state)
        state = pure_density(state)
    return apply_channel(op, state)


def apply_matrix_to_factor(matrix: np.ndarray, state: StateVector,
                           labels: Sequence[str]) -> StateVector:
    """Apply a square matrix to the named factor of a pure state (in label
    order of the state's layout)."""
    lay = state.layout
    sub = lay.sub(labels)
    front, rest = _front_positions(lay, sub.labels())
    t = state.tensor().transpose(front + rest)
    d = sub.total_dim
    out = matrix @ t.reshape(d, -1)
    rest_lay = RegisterLayout(tuple(lay.registers[k] for k in rest))
    new_lay = concat(sub, rest_lay)
    res = StateVector(new_lay, out.reshape(-1))
    return permute_registers(res, lay.labels())


def reduced_density_matrix(state: State, keep: Iterable[str]) -> np.ndarray:
    """Raw reduced density matrix on `keep` (kept in original layout order)."""
    lay = state.layout
    keep_lay = lay.sub(keep)
    front, rest = _front_positions(lay, keep_lay.labels())
    dkeep = keep_lay.total_dim
    if isinstance(state, StateVector):
        m = state.tensor().transpose(front + rest).reshape(dkeep, -1)
        return m @ m.conj().T
    dims = lay.dims()
    n = len(dims)
    perm = front + rest
    t = state.matrix.reshape(dims + dims).transpose(perm + [n + p for p in perm])
    drest = lay.total_dim // dkeep
    t = t.reshape(dkeep, drest, dkeep, drest)
    return np.einsum("iaja->ij", t)


def partial_trace(state: State, keep: Iterable[str]) -> DensityOperator:
    """Trace out everything but `keep`; result keeps original register order."""
    lay = state.layout
    keep_lay = lay.sub(keep)
    return DensityOperator(keep_lay, reduced_density_matrix(state, keep))
