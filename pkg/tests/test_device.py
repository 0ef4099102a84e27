"""Single-device behavior: reads, pulses, and the write-verify loop."""

import numpy as np
import pytest

from memxbar.device import (DeviceParams, MemristorCell, program_to,
                            ramp_amplitudes, ramp_response, read_current,
                            reset_pulse, set_pulse)
from memxbar.errors import (AboveThresholdError, AmplitudeOutOfRangeError,
                            ProgrammingFailedError, StuckDeviceError)


def quiet_params(**kw):
    kw.setdefault("response_noise_sigma", 0.0)
    return DeviceParams(**kw)


def test_read_is_ohmic():
    cell = MemristorCell(resistance=20e3)
    assert read_current(cell, 0.5, DeviceParams()) == pytest.approx(0.5 / 20e3)


def test_read_refuses_disturbing_voltage():
    cell = MemristorCell(resistance=20e3)
    with pytest.raises(AboveThresholdError):
        read_current(cell, 1.5, DeviceParams())
    with pytest.raises(AboveThresholdError):
        read_current(cell, -2.0, DeviceParams())


def test_set_pulse_reaches_lrs():
    params = quiet_params()
    cell = MemristorCell(resistance=55e3)
    set_pulse(cell, params, np.random.default_rng(0))
    assert cell.resistance == params.r_lrs_nominal


def test_reset_pulse_rejects_out_of_ramp_amplitude():
    params = quiet_params()
    cell = MemristorCell(resistance=10e3)
    rng = np.random.default_rng(0)
    with pytest.raises(AmplitudeOutOfRangeError):
        reset_pulse(cell, 1.0, params, rng)
    with pytest.raises(AmplitudeOutOfRangeError):
        reset_pulse(cell, 3.1, params, rng)


def test_ramp_response_is_monotone_and_spans_window():
    params = quiet_params()
    amps = ramp_amplitudes(params)
    values = [ramp_response(a, params) for a in amps]
    assert values[0] == params.r_lrs_nominal
    assert values[-1] == params.r_hrs_nominal
    assert all(b > a for a, b in zip(values, values[1:]))


def test_ramp_amplitudes_ladder():
    params = quiet_params(ramp_step=0.25)
    amps = ramp_amplitudes(params)
    assert amps[0] == params.ramp_range[0]
    assert amps[-1] == params.ramp_range[1]
    assert np.allclose(np.diff(amps), 0.25)


def test_program_lands_in_band():
    params = DeviceParams()
    rng = np.random.default_rng(7)
    for target in (12e3, 25e3, 48e3):
        cell = MemristorCell(resistance=params.r_hrs_nominal)
        log = program_to(cell, target, params, rng)
        assert log.success
        assert abs(cell.resistance - target) <= params.program_tolerance * target


def test_program_noiseless_takes_single_attempt():
    params = quiet_params()
    rng = np.random.default_rng(0)
    cell = MemristorCell(resistance=params.r_hrs_nominal)
    log = program_to(cell, 30e3, params, rng)
    assert log.attempts == 1


def test_program_rejects_out_of_window_target():
    params = DeviceParams()
    cell = MemristorCell(resistance=30e3)
    with pytest.raises(ValueError):
        program_to(cell, 5e3, params, np.random.default_rng(0))


def test_program_stuck_in_band_is_free():
    params = DeviceParams()
    cell = MemristorCell(resistance=30e3, stuck=30e3)
    log = program_to(cell, 31e3, params, np.random.default_rng(0))
    assert log.success and log.pulses == 0


def test_program_stuck_out_of_band_raises():
    params = DeviceParams()
    cell = MemristorCell(resistance=55e3, stuck=55e3)
    with pytest.raises(StuckDeviceError):
        program_to(cell, 12e3, params, np.random.default_rng(0))


def test_program_gives_up_eventually():
    # a huge response spread makes the band unreachable often enough
    params = DeviceParams(response_noise_sigma=0.8, max_program_iterations=2)
    cell = MemristorCell(resistance=params.r_hrs_nominal)
    with pytest.raises(ProgrammingFailedError):
        program_to(cell, 12e3, params, np.random.default_rng(3),
                   tolerance=0.001)


def test_program_is_seed_deterministic():
    params = DeviceParams()
    logs = []
    for _ in range(2):
        cell = MemristorCell(resistance=params.r_hrs_nominal)
        logs.append(program_to(cell, 33e3, params, np.random.default_rng(42)))
    assert logs[0].final_resistance == logs[1].final_resistance
    assert logs[0].pulses == logs[1].pulses
