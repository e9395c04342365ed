"""Temperature drift compensation for FMCW radar amplitude profiles."""

from radarcal.datacube import (
    AmplitudeTensor,
    RadarConfig,
    RadarCube,
    TemperatureLog,
    read_amplitudes,
    read_cube,
    read_temperature_log,
    write_amplitudes,
    write_cube,
    write_temperature_log,
)
from radarcal.preprocess import compute_amplitude_profiles
from radarcal.calibration import (
    CalibrationModel,
    apply_correction,
    fit,
    load_model,
    save_model,
    split_train_test,
)
from radarcal.evaluation import EvaluationReport, evaluate, pearson

__version__ = "0.1.0"

__all__ = [
    "AmplitudeTensor",
    "CalibrationModel",
    "EvaluationReport",
    "RadarConfig",
    "RadarCube",
    "TemperatureLog",
    "apply_correction",
    "compute_amplitude_profiles",
    "evaluate",
    "fit",
    "load_model",
    "pearson",
    "read_amplitudes",
    "read_cube",
    "read_temperature_log",
    "save_model",
    "split_train_test",
    "write_amplitudes",
    "write_cube",
    "write_temperature_log",
]
