"""Two-tier DAG consensus: core validators order leaders, auxiliary validators add certified vertices."""

from .committee import Committee, Kind, ValidatorId, aux, core
from .messages import AuxCertificate, AuxProposal, AuxRef, CoreVertex, decode

__version__ = "0.1.0"

__all__ = [
    "AuxCertificate",
    "AuxProposal",
    "AuxRef",
    "Committee",
    "CoreVertex",
    "Kind",
    "ValidatorId",
    "aux",
    "core",
    "decode",
]
