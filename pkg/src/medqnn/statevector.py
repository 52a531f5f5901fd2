"""Exact statevector simulation of small qubit circuits.

Amplitudes are indexed little-endian: bit b of a basis index addresses
qubit b, so |q3 q2 q1 q0> with q0 flipped lives at index 1. Gates update
amplitude pairs in place of building full 2^n x 2^n matrices, which keeps
a gate O(2^n). Global phase is never normalized away; only |amplitude|^2
derived quantities are contractual.

The gate helpers accept arrays of shape (..., 2^n) so a batch of states
(one row per input sample) moves through a circuit in single numpy calls.
``Circuit`` is a flat gate list whose rotation angles are bound either to
a trainable parameter slot or to an input-vector slot; that split is what
lets ``param_shift_grad`` shift exactly one source.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_QUBITS = 20


@dataclass(frozen=True)
class QubitState:
    num_qubits: int
    amplitudes: np.ndarray  # complex, shape (2**num_qubits,)

    def to_json_list(self) -> list[list[float]]:
        return [[float(a.real), float(a.imag)] for a in self.amplitudes]


def zero_state(num_qubits: int) -> QubitState:
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
    amps = np.zeros(2**num_qubits, dtype=complex)
    amps[0] = 1.0
    return QubitState(num_qubits, amps)


def _check_qubit(num_qubits: int, qubit: int) -> None:
    if not 0 <= qubit < num_qubits:
        raise ValueError(f"qubit {qubit} out of range for {num_qubits} qubits")


def _qubit_axis(ndim: int, qubit: int) -> int:
    # After reshaping the last axis to [2]*n (C order), the least significant
    # bit (qubit 0) is the last axis.
    return ndim - 1 - qubit


def apply_1q_array(amps: np.ndarray, mat: np.ndarray, qubit: int, num_qubits: int) -> np.ndarray:
    lead = amps.shape[:-1]
    arr = amps.reshape(*lead, *([2] * num_qubits))
    axis = len(lead) + _qubit_axis(num_qubits, qubit)
    arr = np.moveaxis(arr, axis, -1)
    arr = arr @ mat.T
    arr = np.moveaxis(arr, -1, axis)
    return arr.reshape(*lead, 2**num_qubits)


def apply_cnot_array(amps: np.ndarray, control: int, target: int, num_qubits: int) -> np.ndarray:
    lead = amps.shape[:-1]
    arr = amps.reshape(*lead, *([2] * num_qubits)).copy()
    c_axis = len(lead) + _qubit_axis(num_qubits, control)
    t_axis = len(lead) + _qubit_axis(num_qubits, target)
    idx10 = [slice(None)] * arr.ndim
    idx11 = [slice(None)] * arr.ndim
    idx10[c_axis], idx10[t_axis] = 1, 0
    idx11[c_axis], idx11[t_axis] = 1, 1
    arr[tuple(idx10)], arr[tuple(idx11)] = (
        arr[tuple(idx11)].copy(),
        arr[tuple(idx10)].copy(),
    )
    return arr.reshape(*lead, 2**num_qubits)


def ry_matrix(phi: float) -> np.ndarray:
    c, s = np.cos(phi / 2.0), np.sin(phi / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(phi: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * phi), 0.0], [0.0, np.exp(0.5j * phi)]], dtype=complex)


def apply_ry(state: QubitState, qubit: int, phi: float) -> QubitState:
    _check_qubit(state.num_qubits, qubit)
    return QubitState(
        state.num_qubits, apply_1q_array(state.amplitudes, ry_matrix(phi), qubit, state.num_qubits)
    )


def apply_rz(state: QubitState, qubit: int, phi: float) -> QubitState:
    _check_qubit(state.num_qubits, qubit)
    return QubitState(
        state.num_qubits, apply_1q_array(state.amplitudes, rz_matrix(phi), qubit, state.num_qubits)
    )


def apply_cnot(state: QubitState, control: int, target: int) -> QubitState:
    _check_qubit(state.num_qubits, control)
    _check_qubit(state.num_qubits, target)
    if control == target:
        raise ValueError("control and target must differ")
    return QubitState(
        state.num_qubits, apply_cnot_array(state.amplitudes, control, target, state.num_qubits)
    )


def expect_z_array(amps: np.ndarray, qubit: int, num_qubits: int) -> np.ndarray:
    lead = amps.shape[:-1]
    probs = (amps.real**2 + amps.imag**2).reshape(*lead, *([2] * num_qubits))
    axis = len(lead) + _qubit_axis(num_qubits, qubit)
    reduce_axes = tuple(a for a in range(len(lead), probs.ndim) if a != axis)
    marginal = probs.sum(axis=reduce_axes)  # (..., 2)
    return marginal[..., 0] - marginal[..., 1]


def expect_z(state: QubitState, qubit: int) -> float:
    _check_qubit(state.num_qubits, qubit)
    return float(expect_z_array(state.amplitudes, qubit, state.num_qubits))


# --- parameterized circuits -------------------------------------------------

@dataclass(frozen=True)
class Op:
    """One gate. Rotations take their angle from ``scale * source_value``
    where the source is params[param] or inputs[input_slot] (exactly one);
    cnot ops carry no angle.
    """

    gate: str  # "ry" | "rz" | "cnot"
    qubits: tuple[int, ...]
    param: int | None = None
    input_slot: int | None = None
    scale: float = 1.0


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    ops: tuple[Op, ...] = field(default_factory=tuple)

    def num_params(self) -> int:
        return 1 + max((op.param for op in self.ops if op.param is not None), default=-1)


def _op_angle(op: Op, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    if op.param is not None:
        return op.scale * params[op.param] * np.ones(inputs.shape[:-1])
    return op.scale * inputs[..., op.input_slot]


def run_circuit(
    circuit: Circuit,
    params: np.ndarray,
    inputs: np.ndarray,
    angle_override: dict[int, float | np.ndarray] | None = None,
) -> np.ndarray:
    """Final amplitudes, shape (..., 2^n) for inputs of shape (..., k).

    ``angle_override`` maps op positions to additive angle shifts (used by
    the parameter-shift rule); a shift may be an array broadcastable over
    the lead dimensions, which lets many shifted circuit variants run as
    one stacked evaluation.
    """
    inputs = np.asarray(inputs, dtype=float)
    lead = inputs.shape[:-1]
    n = circuit.num_qubits
    amps = np.zeros(lead + (2**n,), dtype=complex)
    amps[..., 0] = 1.0
    for pos, op in enumerate(circuit.ops):
        if op.gate == "cnot":
            amps = apply_cnot_array(amps, op.qubits[0], op.qubits[1], n)
            continue
        angle = _op_angle(op, params, inputs)
        if angle_override and pos in angle_override:
            angle = angle + angle_override[pos]
        if np.ndim(angle) == 0 or angle.size == 1 or np.ptp(angle) == 0.0:
            scalar = float(np.reshape(angle, -1)[0]) if np.ndim(angle) else float(angle)
            mat = ry_matrix(scalar) if op.gate == "ry" else rz_matrix(scalar)
            amps = apply_1q_array(amps, mat, op.qubits[0], n)
        else:
            amps = _apply_rotation_batched(amps, op.gate, op.qubits[0], angle, n)
    return amps


def _apply_rotation_batched(
    amps: np.ndarray, gate: str, qubit: int, angles: np.ndarray, num_qubits: int
) -> np.ndarray:
    """Rotation with a per-row angle (encoding gates on batched inputs)."""
    lead = amps.shape[:-1]
    arr = amps.reshape(*lead, *([2] * num_qubits))
    axis = len(lead) + _qubit_axis(num_qubits, qubit)
    arr = np.moveaxis(arr, axis, -1)
    a0, a1 = arr[..., 0], arr[..., 1]
    shape = angles.shape + (1,) * (a0.ndim - angles.ndim)
    half = (angles / 2.0).reshape(shape)
    new = np.empty_like(arr)
    if gate == "ry":
        c, s = np.cos(half), np.sin(half)
        new[..., 0] = c * a0 - s * a1
        new[..., 1] = s * a0 + c * a1
    else:
        new[..., 0] = np.exp(-1j * half) * a0
        new[..., 1] = np.exp(1j * half) * a1
    arr = np.moveaxis(new, -1, axis)
    return arr.reshape(*lead, 2**num_qubits)


def circuit_expectations(circuit: Circuit, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """<Z_q> per qubit, shape (..., num_qubits)."""
    amps = run_circuit(circuit, params, inputs)
    cols = [expect_z_array(amps, q, circuit.num_qubits) for q in range(circuit.num_qubits)]
    return np.stack(cols, axis=-1)


def _shifted_expectations(
    circuit: Circuit, params: np.ndarray, inputs: np.ndarray, positions: list[int], shift: float
) -> np.ndarray:
    override = {pos: shift for pos in positions}
    amps = run_circuit(circuit, params, inputs, angle_override=override)
    cols = [expect_z_array(amps, q, circuit.num_qubits) for q in range(circuit.num_qubits)]
    return np.stack(cols, axis=-1)


def param_shift_grad_all(circuit: Circuit, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """d<Z_q>/d params[j] for every parameter, shape (num_params, ..., n).

    All 2 * (number of parameterized rotations) shifted circuits run as a
    single stacked forward pass over one extra lead axis, which is what
    keeps training batches fast.
    """
    occurrences = [
        (pos, op.param, op.scale)
        for pos, op in enumerate(circuit.ops)
        if op.param is not None and op.gate in ("ry", "rz")
    ]
    inputs = np.asarray(inputs, dtype=float)
    lead = inputs.shape[:-1]
    num_params = circuit.num_params()
    grads = np.zeros((num_params,) + lead + (circuit.num_qubits,))
    if not occurrences:
        return grads
    variants = 2 * len(occurrences)
    stacked = np.broadcast_to(inputs, (variants,) + inputs.shape)
    override: dict[int, np.ndarray] = {}
    column = (variants,) + (1,) * len(lead)
    for occ, (pos, _, _) in enumerate(occurrences):
        shifts = np.zeros(column)
        shifts[2 * occ] = np.pi / 2.0
        shifts[2 * occ + 1] = -np.pi / 2.0
        override[pos] = shifts
    amps = run_circuit(circuit, params, stacked, angle_override=override)
    expectations = np.stack(
        [expect_z_array(amps, q, circuit.num_qubits) for q in range(circuit.num_qubits)],
        axis=-1,
    )  # (variants, *lead, n)
    for occ, (pos, param_index, scale) in enumerate(occurrences):
        grads[param_index] += scale * 0.5 * (expectations[2 * occ] - expectations[2 * occ + 1])
    return grads


def param_shift_grad(
    circuit: Circuit, params: np.ndarray, inputs: np.ndarray, param_index: int
) -> np.ndarray:
    """d<Z_q>/d(params[param_index]) for every qubit, exact for RY/RZ.

    Each gate bound to the parameter contributes
    scale * [f(angle + pi/2) - f(angle - pi/2)] / 2.
    """
    positions = [
        pos
        for pos, op in enumerate(circuit.ops)
        if op.param == param_index and op.gate in ("ry", "rz")
    ]
    if not positions:
        bad = [op.gate for op in circuit.ops if op.param == param_index]
        what = f"gate {bad[0]!r}" if bad else "no gate"
        raise ValueError(f"parameter {param_index} is attached to {what}; shift rule needs ry/rz")
    grad = None
    for pos in positions:
        plus = _shifted_expectations(circuit, params, inputs, [pos], np.pi / 2.0)
        minus = _shifted_expectations(circuit, params, inputs, [pos], -np.pi / 2.0)
        term = circuit.ops[pos].scale * 0.5 * (plus - minus)
        grad = term if grad is None else grad + term
    return grad


def input_shift_grad(
    circuit: Circuit, params: np.ndarray, inputs: np.ndarray, input_slot: int
) -> np.ndarray:
    """d<Z_q>/d(inputs[..., input_slot]) via the same shift rule."""
    positions = [
        pos
        for pos, op in enumerate(circuit.ops)
        if op.input_slot == input_slot and op.gate in ("ry", "rz")
    ]
    if not positions:
        raise ValueError(f"input slot {input_slot} feeds no rotation gate")
    grad = None
    for pos in positions:
        plus = _shifted_expectations(circuit, params, inputs, [pos], np.pi / 2.0)
        minus = _shifted_expectations(circuit, params, inputs, [pos], -np.pi / 2.0)
        term = circuit.ops[pos].scale * 0.5 * (plus - minus)
        grad = term if grad is None else grad + term
    return grad
