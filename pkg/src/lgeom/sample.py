"""Validated lifetime samples."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataValidationError

__all__ = ["Sample"]


@dataclass(frozen=True)
class Sample:
    """Strictly positive, finite lifetimes stored in ascending order.

    ``original`` keeps the observations in the order they were supplied,
    which matters for the CLI (``sample`` prints draws in generation order).
    """

    values: np.ndarray
    original: np.ndarray = field(repr=False)

    @classmethod
    def from_values(cls, data) -> "Sample":
        arr = np.asarray(data, dtype=float).ravel()
        if arr.size == 0:
            raise DataValidationError("sample is empty")
        bad = [(i + 1, f"invalid lifetime {v!r}") for i, v in enumerate(arr) if not (np.isfinite(v) and v > 0)]
        if bad:
            raise DataValidationError(
                f"{len(bad)} value(s) are not strictly positive finite numbers", bad
            )
        original = arr.copy()
        original.setflags(write=False)
        values = np.sort(arr)
        values.setflags(write=False)
        return cls(values=values, original=original)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n

    def require_fit_size(self, minimum: int = 2) -> None:
        if self.n < minimum:
            raise DataValidationError(f"need at least {minimum} observations to fit, got {self.n}")
