"""Passive 16x16 crossbar plus its amplifier chain.

Each row feeds an inverting summing amplifier (feedback resistor r_f);
adjacent row pairs (2k, 2k+1) drive a differential stage realizing one
signed synapse per column, followed by a saturating activation amplifier
and an output divider.  Programming a cell uses bias-voltage maps that keep
every half-selected device below the switching threshold, and reads the
device back through the summing amplifier with a quantizing ADC.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import device as dev
from .device import DeviceParams, MemristorCell, ProgramLog
from .errors import (
    BiasViolationError,
    InputOverrangeError,
    OddRowCountError,
    ShapeMismatchError,
)

Mode = str  # "SET" | "RESET" | "READ"


@dataclass
class CrossbarConfig:
    """Array geometry and amplifier-chain nominals."""

    rows: int = 16
    cols: int = 16
    r_f: float = 100e3
    r_1: float = 100e3
    r_2: float = 100e3
    r_3: float = 0.0
    r_4: float = 100e3
    u_sat: float = 1.0       # activation amplifier saturation
    u_rail: float = 15.0     # summing/differential stage supply swing
    u_in_max: float = 1.0
    resistor_tolerance: float = 0.01
    adc_step: float = 0.0025
    adc_range: float = 5.0

    def __post_init__(self):
        if min(self.r_f, self.r_1, self.r_2, self.r_4) <= 0 or self.r_3 < 0:
            raise ValueError("amplifier resistors must be positive (r_3 may be 0)")
        if not 0 < self.k_scale <= 1:
            raise ValueError("output divider must scale by a factor in (0, 1]")
        if self.u_in_max <= 0 or self.u_sat <= 0 or self.u_rail < self.u_sat:
            raise ValueError("need 0 < u_sat <= u_rail and u_in_max > 0")

    @property
    def k_diff(self) -> float:
        return self.r_2 / self.r_1

    @property
    def k_scale(self) -> float:
        return self.r_4 / (self.r_3 + self.r_4)

    def to_dict(self) -> dict:
        from dataclasses import asdict
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CrossbarConfig":
        return cls(**d)


class Crossbar:
    """Grid of memristor cells with the shared amplifier configuration."""

    def __init__(self, config: CrossbarConfig, device: DeviceParams,
                 grid: list[list[MemristorCell]] | None = None):
        self.config = config
        self.device = device
        if config.u_in_max >= device.v_threshold:
            raise ValueError("data-signal limit must stay below the device threshold")
        if grid is None:
            grid = [[MemristorCell(resistance=device.r_hrs_nominal)
                     for _ in range(config.cols)] for _ in range(config.rows)]
        if len(grid) != config.rows or any(len(r) != config.cols for r in grid):
            raise ValueError("grid dimensions do not match config")
        self.grid = grid

    @classmethod
    def from_resistances(cls, config: CrossbarConfig, device: DeviceParams,
                         matrix: np.ndarray) -> "Crossbar":
        matrix = np.asarray(matrix, dtype=float)
        grid = [[MemristorCell(resistance=float(matrix[r, c]))
                 for c in range(config.cols)] for r in range(config.rows)]
        return cls(config, device, grid)

    def resistance_matrix(self) -> np.ndarray:
        return np.array([[cell.resistance for cell in row] for row in self.grid])

    def copy(self) -> "Crossbar":
        grid = [[cell.copy() for cell in row] for row in self.grid]
        return Crossbar(self.config, self.device, grid)


@dataclass
class BiasAssignment:
    """Full row/column voltage map for one programming or read operation."""

    row_voltages: np.ndarray
    col_voltages: np.ndarray
    target: tuple[int, int]
    mode: Mode

    def drops(self) -> np.ndarray:
        """Voltage across each cell, column line minus row line."""
        return self.col_voltages[None, :] - self.row_voltages[:, None]

    def max_nontarget_drop(self) -> float:
        d = np.abs(self.drops())
        r, c = self.target
        d[r, c] = 0.0
        return float(d.max())


def bias_assignment(xbar: Crossbar, target: tuple[int, int], mode: Mode,
                    amplitude: float | None = None) -> BiasAssignment:
    """Voltage map neutralizing sneak currents for the chosen operation.

    SET drives the target column with the SET pulse while all other rows
    get the same bias (zeroing drops in that column) and other columns sit
    at half amplitude.  RESET biases all non-selected lines to half the
    maximum pulse.  READ grounds everything except the driven column.
    """
    r, c = target
    cfg, dp = xbar.config, xbar.device
    if not (0 <= r < cfg.rows and 0 <= c < cfg.cols):
        raise ValueError(f"target {target} outside {cfg.rows}x{cfg.cols} grid")
    rows = np.zeros(cfg.rows)
    cols = np.zeros(cfg.cols)
    if mode == "SET":
        cols[:] = -dp.v_threshold
        cols[c] = dp.v_set
        rows[:] = dp.v_set
        rows[r] = 0.0
    elif mode == "RESET":
        a = dev.MAX_PROGRAM_AMPLITUDE if amplitude is None else amplitude
        cols[:] = dp.v_threshold
        cols[c] = a
        rows[:] = dp.v_threshold
        rows[r] = 0.0
    elif mode == "READ":
        cols[c] = dp.v_read
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return BiasAssignment(row_voltages=rows, col_voltages=cols, target=target,
                          mode=mode)


def check_bias(assignment: BiasAssignment, v_threshold: float) -> None:
    worst = assignment.max_nontarget_drop()
    if worst > v_threshold + 1e-12:
        raise BiasViolationError(
            f"{assignment.mode} map exposes a half-selected cell to "
            f"{worst:.3g} V (limit {v_threshold} V)"
        )


def _check_inputs(inputs: np.ndarray, cfg: CrossbarConfig) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=float)
    if inputs.shape != (cfg.cols,):
        raise ValueError(f"expected {cfg.cols} inputs, got shape {inputs.shape}")
    if np.any(np.abs(inputs) > cfg.u_in_max * (1 + 1e-12)):
        raise InputOverrangeError(
            f"input exceeds +/-{cfg.u_in_max} V data range"
        )
    return inputs


def row_summed_voltage(xbar: Crossbar, row: int, inputs: np.ndarray) -> float:
    """Summing-amplifier output for one row, clipped at the amplifier swing."""
    inputs = _check_inputs(inputs, xbar.config)
    r = np.array([cell.resistance for cell in xbar.grid[row]])
    u = -xbar.config.r_f * float(np.sum(inputs / r))
    return float(np.clip(u, -xbar.config.u_rail, xbar.config.u_rail))


def layer_forward(xbar: Crossbar, inputs: np.ndarray,
                  bias: np.ndarray | None = None) -> np.ndarray:
    """One crossbar layer: differential pairs, activation clamp, output scaling.

    ``bias`` (one value per row pair) is summed into the difference stage
    ahead of the saturating amplifier, mirroring a digitally sourced offset
    at the same node as the array contribution.
    """
    cfg = xbar.config
    if cfg.rows % 2 != 0:
        raise OddRowCountError("differential pairing needs an even row count")
    inputs = _check_inputs(inputs, cfg)
    res = xbar.resistance_matrix()
    sums = np.clip(-cfg.r_f * (inputs[None, :] / res).sum(axis=1),
                   -cfg.u_rail, cfg.u_rail)
    diff = cfg.k_diff * (sums[1::2] - sums[0::2])
    if bias is not None:
        bias = np.asarray(bias, dtype=float)
        if bias.shape != (cfg.rows // 2,):
            raise ShapeMismatchError(
                f"bias needs shape ({cfg.rows // 2},), got {bias.shape}")
        diff = diff + bias
    diff = np.clip(diff, -cfg.u_rail, cfg.u_rail)
    activated = np.clip(diff, -cfg.u_sat, cfg.u_sat)
    return cfg.k_scale * activated


def adc_quantize(u: float, step: float, full_scale: float) -> float:
    """Half-up quantization to the converter grid, clamped to its range."""
    u = min(max(u, -full_scale), full_scale)
    return float(np.floor(u / step + 0.5) * step)


def inferred_resistance(u_out: float, u_test: float, r_f: float) -> float:
    """Resistance from the summing-amplifier read-back voltage."""
    if u_out <= 0:
        return float("inf")
    return u_test * r_f / u_out


def _array_read(xbar: Crossbar):
    """Read-back closure: test pulse, amplifier, ADC, resistance formula."""
    cfg, dp = xbar.config, xbar.device

    def read(cell: MemristorCell) -> float:
        u_out = abs(row_summed_voltage_for_read(cell.resistance, cfg, dp))
        u_q = adc_quantize(u_out, cfg.adc_step, cfg.adc_range)
        return inferred_resistance(u_q, dp.v_read, cfg.r_f)

    return read


def row_summed_voltage_for_read(resistance: float, cfg: CrossbarConfig,
                                dp: DeviceParams) -> float:
    # single driven column, all others grounded: only the target cell conducts
    u = -cfg.r_f * dp.v_read / resistance
    return float(np.clip(u, -cfg.u_rail, cfg.u_rail))


def read_back_error_bound(target: float, cfg: CrossbarConfig,
                          dp: DeviceParams) -> float:
    """Worst-case resistance error the quantized read path can introduce."""
    r_top = target * (1 + dp.program_tolerance)
    return r_top ** 2 * (cfg.adc_step / 2) / (dp.v_read * cfg.r_f)


def program_cell(xbar: Crossbar, target: tuple[int, int], target_r: float,
                 rng: np.random.Generator) -> ProgramLog:
    """Write-verify one cell in the array context.

    Every bias map the pulse sequence will use is checked against the
    switching threshold first, and the verify step goes through the
    amplifier/ADC read path.  The tolerance band is tightened by the
    read-back error bound so the true resistance lands inside the
    requested band.
    """
    cfg, dp = xbar.config, xbar.device
    r, c = target
    check_bias(bias_assignment(xbar, target, "SET"), dp.v_threshold)
    check_bias(bias_assignment(xbar, target, "READ"), dp.v_threshold)
    for a in dev.ramp_amplitudes(dp):
        check_bias(bias_assignment(xbar, target, "RESET", amplitude=float(a)),
                   dp.v_threshold)
    margin = read_back_error_bound(target_r, cfg, dp) / target_r
    tol = max(dp.program_tolerance - margin, dp.program_tolerance / 2)
    return dev.program_to(xbar.grid[r][c], target_r, dp, rng,
                          read_resistance=_array_read(xbar),
                          tolerance=tol)


def two_layer_forward(xbar1: Crossbar, xbar2: Crossbar, b_hidden: np.ndarray,
                      b_out: np.ndarray, x: np.ndarray, n_hidden: int = 8,
                      n_out: int = 4) -> np.ndarray:
    """Full circuit inference: two arrays with digitally added biases.

    Biases enter each difference stage ahead of its saturating amplifier.
    The hidden-layer output is re-emitted through the data DACs, so it is
    clamped to the data-voltage range before entering the second array.
    """
    cfg1 = xbar1.config
    bias1 = np.zeros(cfg1.rows // 2)
    bias1[:n_hidden] = np.asarray(b_hidden, dtype=float)
    hidden = layer_forward(xbar1, x, bias1)[:n_hidden]
    hidden = np.clip(hidden, -cfg1.u_in_max, cfg1.u_in_max)
    padded = np.zeros(xbar2.config.cols)
    padded[:n_hidden] = hidden
    bias2 = np.zeros(xbar2.config.rows // 2)
    bias2[:n_out] = np.asarray(b_out, dtype=float)
    return layer_forward(xbar2, padded, bias2)[:n_out]


def save_crossbar_csv(xbar: Crossbar, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "resistance_ohm", "stuck_flag", "stuck_ohm"])
        for r in range(xbar.config.rows):
            for c in range(xbar.config.cols):
                cell = xbar.grid[r][c]
                writer.writerow([r, c, repr(cell.resistance),
                                 int(cell.stuck is not None),
                                 "" if cell.stuck is None else repr(cell.stuck)])


def load_crossbar_csv(path, config: CrossbarConfig, device: DeviceParams) -> Crossbar:
    xbar = Crossbar(config, device)
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            r, c = int(rec["row"]), int(rec["col"])
            stuck = float(rec["stuck_ohm"]) if int(rec["stuck_flag"]) else None
            xbar.grid[r][c] = MemristorCell(resistance=float(rec["resistance_ohm"]),
                                            stuck=stuck)
    return xbar
