"""Affine expressions over loop induction variables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Mapping, Union


@dataclass(frozen=True)
class AffineExpr:
    """`const + sum(coeff * symbol)`; symbols are compared by identity."""

    const: int = 0
    terms: tuple[tuple[Hashable, int], ...] = ()

    @classmethod
    def var(cls, symbol: Hashable, coeff: int = 1) -> AffineExpr:
        return cls(0, ((symbol, coeff),) if coeff else ())

    @classmethod
    def constant(cls, value: int) -> AffineExpr:
        return cls(int(value), ())

    @classmethod
    def of(cls, value: AffineLike) -> AffineExpr:
        return value if isinstance(value, AffineExpr) else cls.constant(value)

    @staticmethod
    def _combine(items: Iterable[tuple[Hashable, int]]) -> tuple[tuple[Hashable, int], ...]:
        order: list[Hashable] = []
        coeffs: dict[int, int] = {}
        symbols: dict[int, Hashable] = {}
        for sym, coeff in items:
            key = id(sym)
            if key not in coeffs:
                order.append(sym)
                coeffs[key] = 0
                symbols[key] = sym
            coeffs[key] += coeff
        return tuple((sym, coeffs[id(sym)]) for sym in order if coeffs[id(sym)] != 0)

    def __add__(self, other: AffineLike) -> AffineExpr:
        other = AffineExpr.of(other)
        return AffineExpr(self.const + other.const, self._combine(self.terms + other.terms))

    __radd__ = __add__

    def __neg__(self) -> AffineExpr:
        return AffineExpr(-self.const, tuple((s, -c) for s, c in self.terms))

    def __sub__(self, other: AffineLike) -> AffineExpr:
        return self + (-AffineExpr.of(other))

    def __rsub__(self, other: AffineLike) -> AffineExpr:
        return AffineExpr.of(other) - self

    def __mul__(self, factor: int) -> AffineExpr:
        if not isinstance(factor, int):
            return NotImplemented
        return AffineExpr(self.const * factor, self._combine((s, c * factor) for s, c in self.terms))

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AffineExpr):
            return NotImplemented
        if self.const != other.const or len(self.terms) != len(other.terms):
            return False
        mine = {id(s): c for s, c in self.terms}
        return all(mine.get(id(s)) == c for s, c in other.terms)

    def __hash__(self) -> int:
        return hash((self.const, frozenset((id(s), c) for s, c in self.terms)))

    @property
    def symbols(self) -> tuple[Hashable, ...]:
        return tuple(s for s, _ in self.terms)

    @property
    def is_constant(self) -> bool:
        return not self.terms

    def substitute(self, mapping: Callable[[Hashable], AffineExpr | None]) -> AffineExpr:
        """Replace symbols for which `mapping` returns an expression."""

        out = AffineExpr.constant(self.const)
        for sym, coeff in self.terms:
            replacement = mapping(sym)
            out = out + (replacement * coeff if replacement is not None else AffineExpr.var(sym, coeff))
        return out

    def evaluate(self, env: Mapping[Hashable, int]) -> int:
        return self.const + sum(coeff * env[sym] for sym, coeff in self.terms)

    def render(self, name: Callable[[Hashable], str]) -> str:
        parts: list[str] = []
        for sym, coeff in self.terms:
            text = name(sym) if abs(coeff) == 1 else f"{name(sym)} * {abs(coeff)}"
            if not parts:
                parts.append(text if coeff > 0 else f"-{text}")
            else:
                parts.append(f"+ {text}" if coeff > 0 else f"- {text}")
        if self.const or not parts:
            if not parts:
                parts.append(str(self.const))
            else:
                parts.append(f"+ {self.const}" if self.const > 0 else f"- {-self.const}")
        return " ".join(parts)


AffineLike = Union[AffineExpr, int]
