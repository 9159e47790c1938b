"""smcal: simulation-grounded MPI system-matrix calibration toolkit."""

from .core import (
    AliasError,
    DegenerateRangeError,
    DomainError,
    DuplicateRowError,
    Grid3,
    IncompleteDomainError,
    ParticleModel,
    Phantom,
    RowNotFoundError,
    ScanSequence,
    SignalVector,
    SMRow,
    SystemMatrix,
    TrainingDivergedError,
    row_lookup,
    voxel_coordinate,
)

__version__ = "0.1.0"
