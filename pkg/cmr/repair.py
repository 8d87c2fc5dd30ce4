from dataclasses import dataclass
from typing import Dict

import galois


@dataclass(frozen=True)
class RepairOutcome:
    """Recovered payloads by node index and the symbols read from each helper"""

    recovered: Dict[int, galois.FieldArray]
    per_helper: Dict[int, int]

    @property
    def downloaded(self) -> int:
        return sum(self.per_helper.values())
