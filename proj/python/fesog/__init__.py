"""Python bindings for the federated social recommendation simulator."""

from ._fesog import (
    ConfigError,
    decode_packet,
    encode_packet,
    load_checkpoint,
    run,
    sweep,
    train,
    write_synthetic,
)

__all__ = [
    "ConfigError",
    "decode_packet",
    "encode_packet",
    "load_checkpoint",
    "run",
    "sweep",
    "train",
    "write_synthetic",
]
