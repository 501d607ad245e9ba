"""Tactile cloth property sensing."""

from ._core import (
    ClothItem,
    EmptyInputError,
    Error,
    FormatError,
    GripModel,
    IoError,
    PropertyModel,
    ShapeError,
    TrainingError,
    detect_contact,
    extract_features,
    feature_dims,
    filter_bank_hash,
    generate_corpus,
    properties,
    read_hmap,
    read_tseq,
    sequence_features,
    simulate_grip,
    write_hmap,
)

__all__ = [name for name in dir() if not name.startswith("_")]
