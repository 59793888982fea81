"""Multi-level contrastive pretraining on synthetic lesion/healthy patches.

Core pieces: a float64 autodiff tensor (`tensor`), a seeded synthetic image
generator with an oracle detector (`synthgen`), level-set patch construction
(`patches`), a small convolutional encoder (`encoder`), the pairwise and
multi-level contrastive losses (`loss`), self-paced hard-negative mining
(`spl`), probe training and grading metrics (`downstream`), and the
experiment harness (`config`, `runner`, `cli`).
"""

from .config import RunConfig, load_config
from .encoder import Encoder, EncoderConfig
from .errors import ContractViolationError, DegenerateInputError, NumericalFailureError

__version__ = "0.1.0"

__all__ = [
    "RunConfig",
    "load_config",
    "Encoder",
    "EncoderConfig",
    "ContractViolationError",
    "DegenerateInputError",
    "NumericalFailureError",
    "__version__",
]
