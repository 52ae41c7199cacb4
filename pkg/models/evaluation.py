from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from utils.custom_exceptions import InvalidInputError


@dataclass(frozen=True, eq=False)
class PathRecord:
    path_id: int
    wealth: NDArray[np.float64]  # length T + 1
    terminal_loss: float
    controls: NDArray[np.float64]  # shape (T, n)

    @property
    def terminal_wealth(self) -> float:
        return float(self.wealth[-1])

    def to_dict(self) -> dict:
        row = {
            "path_id": self.path_id,
            "terminal_wealth": self.terminal_wealth,
            "terminal_loss": self.terminal_loss,
        }
        row.update({f"wealth_t{t}": float(w) for t, w in enumerate(self.wealth)})
        return row


@dataclass(frozen=True)
class SummaryStats:
    mean_utility: float
    variance: float
    quantile_30: float
    quantile_90: float
    max: float
    min: float

    def __post_init__(self) -> None:
        if not self.min <= self.quantile_30 <= self.quantile_90 <= self.max:
            raise InvalidInputError(f"inconsistent order statistics: {self}")

    def as_column(self) -> list[float]:
        return [
            self.mean_utility,
            self.variance,
            self.quantile_30,
            self.quantile_90,
            self.max,
            self.min,
        ]
