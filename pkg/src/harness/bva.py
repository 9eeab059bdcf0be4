"""
Boundary value analysis for unsigned wire fields
"""
from dataclasses import dataclass
from typing import List


@dataclass(frozen=True)
class NumericField:
    """Legal domain of an unsigned field of the given bit width"""

    width: int
    min: int
    max: int
    nominal: int

    @property
    def limit(self) -> int:
        return (1 << self.width) - 1


def bva_values(field: NumericField) -> List[int]:
    """
    Boundary values for a field: both edges of its legal domain and their
    neighbours, the nominal value, the extremes of the encoding, and the two
    values either side of the sign bit (what a signed reading turns negative).

    Values the field cannot encode are dropped. The result is sorted and
    free of duplicates.
    """
    if field.width < 1:
        raise ValueError(f"width must be positive, got {field.width}")
    if not field.min <= field.nominal <= field.max:
        raise ValueError(f"expected min <= nominal <= max, got {field.min}, {field.nominal}, {field.max}")

    sign_bit = 1 << (field.width - 1)
    candidates = {
        field.min - 1, field.min, field.min + 1,
        field.nominal,
        field.max - 1, field.max, field.max + 1,
        0, field.limit,
        sign_bit, sign_bit - 1,
    }
    return sorted(value for value in candidates if 0 <= value <= field.limit)
