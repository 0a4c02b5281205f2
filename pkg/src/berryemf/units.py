"""Physical constants in natural (hbar = e = m_e = k_B = 1) or SI units."""

from dataclasses import dataclass
import math

from scipy import constants as _c

from .errors import InvalidConfig


@dataclass(frozen=True)
class UnitSystem:
    mode: str
    hbar: float
    e: float
    m_e: float
    k_B: float

    def __post_init__(self):
        for name in ("hbar", "e", "m_e", "k_B"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"constant {name} must be positive")

    @property
    def h(self) -> float:
        # h is derived, so h == 2*pi*hbar holds exactly in every mode
        return 2.0 * math.pi * self.hbar

    @classmethod
    def natural(cls) -> "UnitSystem":
        return cls("natural", 1.0, 1.0, 1.0, 1.0)

    @classmethod
    def si(cls) -> "UnitSystem":
        return cls("si", _c.hbar, _c.e, _c.m_e, _c.k)

    def as_dict(self) -> dict:
        return {"mode": self.mode, "hbar": self.hbar, "e": self.e,
                "m_e": self.m_e, "h": self.h, "k_B": self.k_B}


NATURAL = UnitSystem.natural()
SI = UnitSystem.si()


def get_units(mode) -> UnitSystem:
    """Resolve ``'natural'``/``'si'`` (or pass a ``UnitSystem`` through)."""
    if isinstance(mode, UnitSystem):
        return mode
    key = str(mode).strip().lower()
    if key == "natural":
        return NATURAL
    if key == "si":
        return SI
    raise InvalidConfig(f"unknown unit mode {mode!r}; expected 'natural' or 'si'")
