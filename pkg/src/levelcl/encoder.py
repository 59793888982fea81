"""Small convolutional encoder with an L2-normalized projection head.

Three stride-2 conv/relu stages downsample the patch, global average pooling
yields backbone features, and a linear head projected onto the unit sphere
produces the embeddings used by the contrastive losses. Backbone features
(projection discarded) feed the downstream probe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ContractViolationError
from .seeding import STREAM_INIT, rng_for
from .tensor import Tensor


@dataclass(frozen=True)
class EncoderConfig:
    input_side: int = 32
    channels: tuple[int, ...] = (8, 16, 32)
    embedding_dim: int = 32
    projection_dim: int = 16

    def __post_init__(self):
        if self.projection_dim < 8:
            raise ContractViolationError("projection_dim must be >= 8")
        if any(c < 1 for c in self.channels):
            raise ContractViolationError("all channel counts must be >= 1")
        if self.embedding_dim != self.channels[-1]:
            raise ContractViolationError(
                "embedding_dim must equal the last stage's channel count (GAP output)"
            )
        if self.input_side % (2 ** len(self.channels)) != 0:
            raise ContractViolationError(
                "input_side must be divisible by 2 per conv stage"
            )


def _he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Encoder:
    """Parameter container plus forward passes for encoding and projection."""

    def __init__(self, config: EncoderConfig, seed: int):
        self.config = config
        rng = rng_for(STREAM_INIT, seed)
        params: dict[str, Tensor] = {}
        in_channels = 1
        for stage, out_channels in enumerate(config.channels):
            shape = (out_channels, in_channels, 3, 3)
            params[f"stage{stage}.weight"] = Tensor(
                _he_uniform(rng, shape, fan_in=in_channels * 9), requires_grad=True
            )
            # small positive bias keeps units off the exact relu kink at init
            params[f"stage{stage}.bias"] = Tensor(np.full(out_channels, 0.01),
                                                  requires_grad=True)
            in_channels = out_channels
        params["proj.weight"] = Tensor(
            _he_uniform(rng, (config.embedding_dim, config.projection_dim),
                        fan_in=config.embedding_dim),
            requires_grad=True,
        )
        params["proj.bias"] = Tensor(np.zeros(config.projection_dim), requires_grad=True)
        self.params = params

    def parameters(self) -> dict[str, Tensor]:
        return self.params

    def backbone_parameters(self) -> dict[str, Tensor]:
        return {k: v for k, v in self.params.items() if not k.startswith("proj.")}

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        if set(state) != set(self.params):
            raise ContractViolationError("checkpoint parameter names do not match encoder")
        for name, value in state.items():
            if value.shape != self.params[name].data.shape:
                raise ContractViolationError(
                    f"checkpoint shape {value.shape} does not match '{name}' "
                    f"{self.params[name].data.shape}"
                )
            self.params[name].data = value.astype(np.float64).copy()

    def encode(self, patches: np.ndarray) -> Tensor:
        """Backbone features (batch, embedding_dim) for a stack of P x P patches."""
        patches = np.asarray(patches, dtype=np.float64)
        if patches.ndim == 2:
            patches = patches[None]
        if patches.ndim != 3 or (
            patches.shape[0] and patches.shape[1:] != (self.config.input_side,) * 2
        ):
            raise ContractViolationError(
                f"expected (B, {self.config.input_side}, {self.config.input_side}) patches, "
                f"got {patches.shape}"
            )
        x = Tensor(patches[:, None, :, :])
        for stage in range(len(self.config.channels)):
            w = self.params[f"stage{stage}.weight"]
            b = self.params[f"stage{stage}.bias"]
            x = T.conv2d(x, w, stride=2, padding=1)
            x = T.relu(x + T.reshape(b, (1, b.shape[0], 1, 1)))
        return T.mean(x, axis=(2, 3))

    def project(self, features: Tensor) -> Tensor:
        """Unit-norm projection rows (batch, projection_dim)."""
        head = T.matmul(features, self.params["proj.weight"]) + self.params["proj.bias"]
        return T.l2_normalize(head)

    def embed(self, patches: np.ndarray) -> Tensor:
        return self.project(self.encode(patches))
