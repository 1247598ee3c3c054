"""Winner-takes-all map family: k-means, SOM, supervised topological maps,
and LVQ over one shared training core, plus pattern generation from the
latent grid and the file formats to move data in and out."""

from .errors import ConfigurationError, DataFormatError
from .grid import (
    Codebook,
    Dataset,
    GridTopology,
    LabelAnchors,
    TrainingSchedule,
    grid_distance,
    init_codebook,
    unit_coord,
)
from .operators import (
    WtaKind,
    find_winner,
    find_winners,
    phi_hard,
    phi_lvq,
    phi_som,
    phi_stm,
)
from .training import (
    HistoryRecord,
    TrainingHistory,
    anchor_consistency,
    anneal,
    batch_step,
    energy,
    online_step,
    quantization_error,
    train_batch,
    train_online,
)
from .generator import (
    ExtrapolationWarning,
    LatentQuery,
    activations,
    generate,
    generate_batch,
)
from .dataio import (
    ModelFile,
    export_prototype_grid,
    export_sample_sheet,
    load_anchors,
    load_csv,
    load_idx,
    load_model,
    load_pgm_dir,
    save_model,
    write_history_csv,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DataFormatError",
    "GridTopology",
    "Codebook",
    "Dataset",
    "LabelAnchors",
    "TrainingSchedule",
    "unit_coord",
    "grid_distance",
    "init_codebook",
    "WtaKind",
    "find_winner",
    "find_winners",
    "phi_hard",
    "phi_som",
    "phi_stm",
    "phi_lvq",
    "HistoryRecord",
    "TrainingHistory",
    "energy",
    "anneal",
    "batch_step",
    "online_step",
    "train_batch",
    "train_online",
    "quantization_error",
    "anchor_consistency",
    "LatentQuery",
    "ExtrapolationWarning",
    "activations",
    "generate",
    "generate_batch",
    "ModelFile",
    "load_idx",
    "load_csv",
    "save_model",
    "load_model",
    "load_pgm_dir",
    "load_anchors",
    "export_prototype_grid",
    "export_sample_sheet",
    "write_history_csv",
    "__version__",
]
