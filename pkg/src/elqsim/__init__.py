"""Desk-scale simulator for entanglement protection between bosonic
logical qubits: binomial-code encoding, repetitive autonomous error
correction with calibrated device imperfections, purification by error
detection, GRAPE pulse synthesis, and Wigner/process/entanglement
tomography."""

__version__ = "0.1.0"

from .code import BinomialCode, binomial_code, logical_state
from .device import DeviceParams, load_device_params
from .hilbert import DensityMatrix, Ket, LinearOp, SpaceSpec

__all__ = [
    "BinomialCode",
    "binomial_code",
    "logical_state",
    "DeviceParams",
    "load_device_params",
    "DensityMatrix",
    "Ket",
    "LinearOp",
    "SpaceSpec",
    "__version__",
]
