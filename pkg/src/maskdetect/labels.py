"""The three mask-wearing categories, their ordinals, folders, and colors."""

from __future__ import annotations

from enum import IntEnum


class MaskClass(IntEnum):
    """Fixed ordinals; training label order and annotation colors hang off these."""

    CORRECT_MASK = 0
    INCORRECT_MASK = 1
    WITHOUT_MASK = 2

    @property
    def dir_name(self) -> str:
        return _DIR_NAMES[self]

    @property
    def color(self) -> tuple[int, int, int]:
        return _COLORS[self]

    @classmethod
    def from_name(cls, name: str) -> "MaskClass":
        for member, dir_name in _DIR_NAMES.items():
            if dir_name == name:
                return member
        raise ValueError(f"unknown mask class {name!r}")


_DIR_NAMES = {
    MaskClass.CORRECT_MASK: "correct_mask",
    MaskClass.INCORRECT_MASK: "incorrect_mask",
    MaskClass.WITHOUT_MASK: "without_mask",
}

# RGB outline colors: green = worn correctly, blue = worn incorrectly, red = no mask
_COLORS = {
    MaskClass.CORRECT_MASK: (0, 255, 0),
    MaskClass.INCORRECT_MASK: (0, 0, 255),
    MaskClass.WITHOUT_MASK: (255, 0, 0),
}

CLASS_DIR_NAMES = tuple(_DIR_NAMES[m] for m in MaskClass)
