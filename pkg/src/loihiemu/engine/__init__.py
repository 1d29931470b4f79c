"""Network definition types and the clock-driven simulator."""

from .backends import available_backends, default_backend
from .netdef import (
    Connection,
    GeneratorGroupDef,
    MonitorDef,
    NetworkDef,
    NetworkValidationError,
    NeuronGroupDef,
    SynapseGroupDef,
)
from .simulation import Simulation, bernoulli_generator, build

__all__ = [
    "Connection",
    "GeneratorGroupDef",
    "MonitorDef",
    "NetworkDef",
    "NetworkValidationError",
    "NeuronGroupDef",
    "Simulation",
    "SynapseGroupDef",
    "available_backends",
    "bernoulli_generator",
    "build",
    "default_backend",
]
