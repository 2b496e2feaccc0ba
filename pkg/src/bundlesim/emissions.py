"""Emission and fuel accounting.

Instantaneous rates come from a polynomial in speed and acceleration, one
coefficient set per emission class and quantity:

    rate(v, a) = max(0, c0 + c1*v*a + c2*v*a^2 + c3*v + c4*v^2 + c5*v^3)

CO2 rates are mg/s, fuel rates ml/s.  Per-vehicle totals integrate the rate
over simulation steps with a left Riemann sum, each step contributing
``rate * dt`` evaluated at the post-step speed and the acceleration applied
during the step.  Unit conversions (kg, litres) happen only in reporting.

Coefficient sets are loaded from a small line-oriented text format:

    # comment
    class <name>
    co2 c0 c1 c2 c3 c4 c5
    fuel c0 c1 c2 c3 c4 c5
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "EmissionError",
    "UnknownClass",
    "UnknownQuantity",
    "DuplicateClass",
    "MissingCoefficient",
    "MalformedConfig",
    "QUANTITIES",
    "EmissionClassDef",
    "EmissionRegistry",
    "emission_rate",
    "load_emission_classes",
    "EmissionSample",
    "CumulativeAccount",
    "account_step",
]

QUANTITIES = ("co2", "fuel")


class EmissionError(Exception):
    """Base class for emission configuration and lookup errors."""


class UnknownClass(EmissionError):
    pass


class UnknownQuantity(EmissionError):
    pass


class DuplicateClass(EmissionError):
    pass


class MissingCoefficient(EmissionError):
    pass


class MalformedConfig(EmissionError):
    pass


@dataclass(frozen=True)
class EmissionClassDef:
    """Coefficients c0..c5 for both quantities of one vehicle class."""

    name: str
    co2: tuple[float, float, float, float, float, float]
    fuel: tuple[float, float, float, float, float, float]


def emission_rate(cls: EmissionClassDef, quantity: str, v: float, a: float) -> float:
    """Instantaneous rate for one quantity; never negative."""
    if quantity == "co2":
        c = cls.co2
    elif quantity == "fuel":
        c = cls.fuel
    else:
        raise UnknownQuantity(f"unknown emission quantity {quantity!r}")
    rate = c[0] + c[1] * v * a + c[2] * v * a * a + c[3] * v + c[4] * v * v + c[5] * v ** 3
    return max(0.0, rate)


class EmissionRegistry:
    """Lookup table of emission classes by name."""

    def __init__(self, classes: dict[str, EmissionClassDef] | None = None) -> None:
        self.classes: dict[str, EmissionClassDef] = dict(classes or {})

    def add(self, cls: EmissionClassDef) -> None:
        if cls.name in self.classes:
            raise DuplicateClass(f"emission class {cls.name!r} defined twice")
        self.classes[cls.name] = cls

    def get(self, name: str) -> EmissionClassDef:
        try:
            return self.classes[name]
        except KeyError:
            raise UnknownClass(f"unknown emission class {name!r}") from None

    def rate(self, name: str, quantity: str, v: float, a: float) -> float:
        return emission_rate(self.get(name), quantity, v, a)


def _parse_coefficients(parts: list[str], line_no: int) -> tuple[float, ...]:
    if len(parts) != 6:
        raise MissingCoefficient(
            f"line {line_no}: expected 6 coefficients, got {len(parts)}"
        )
    values = []
    for p in parts:
        try:
            x = float(p)
        except ValueError:
            raise MalformedConfig(f"line {line_no}: bad coefficient {p!r}") from None
        if not math.isfinite(x):
            raise MalformedConfig(f"line {line_no}: non-finite coefficient {p!r}")
        values.append(x)
    return tuple(values)


def load_emission_classes(data: bytes | str) -> EmissionRegistry:
    """Parse the text config format into a registry.

    Every ``class`` block must provide exactly one ``co2`` and one ``fuel``
    line; anything else is rejected rather than guessed at.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    registry = EmissionRegistry()
    name: str | None = None
    co2: tuple[float, ...] | None = None
    fuel: tuple[float, ...] | None = None

    def close_block(line_no: int) -> None:
        nonlocal name, co2, fuel
        if name is None:
            return
        if co2 is None or fuel is None:
            missing = "co2" if co2 is None else "fuel"
            raise MissingCoefficient(
                f"line {line_no}: class {name!r} has no {missing} coefficients"
            )
        registry.add(EmissionClassDef(name, co2, fuel))
        name, co2, fuel = None, None, None

    line_no = 0
    for line_no, raw in enumerate(data.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        keyword = parts[0]
        if keyword == "class":
            if len(parts) != 2:
                raise MalformedConfig(f"line {line_no}: class needs exactly one name")
            close_block(line_no)
            name = parts[1]
        elif keyword in QUANTITIES:
            if name is None:
                raise MalformedConfig(
                    f"line {line_no}: {keyword!r} line before any class"
                )
            coeffs = _parse_coefficients(parts[1:], line_no)
            if keyword == "co2":
                if co2 is not None:
                    raise MalformedConfig(f"line {line_no}: duplicate co2 line")
                co2 = coeffs
            else:
                if fuel is not None:
                    raise MalformedConfig(f"line {line_no}: duplicate fuel line")
                fuel = coeffs
        else:
            raise MalformedConfig(f"line {line_no}: unknown keyword {keyword!r}")
    close_block(line_no + 1)
    return registry


@dataclass(frozen=True)
class EmissionSample:
    """Rates of one vehicle during one step."""

    vehicle: str
    t: float
    co2_rate: float
    fuel_rate: float


@dataclass
class CumulativeAccount:
    """Running per-vehicle totals; monotone because rates are clamped at 0."""

    co2_mg: float = 0.0
    fuel_ml: float = 0.0
    duration_s: float = 0.0


def account_step(account: CumulativeAccount, sample: EmissionSample, dt: float) -> CumulativeAccount:
    """Fold one step into the account (left Riemann rule)."""
    account.co2_mg += sample.co2_rate * dt
    account.fuel_ml += sample.fuel_rate * dt
    account.duration_s += dt
    return account
