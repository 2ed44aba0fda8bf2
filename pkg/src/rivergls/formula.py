"""Model formulas: term algebra and the formula mini-language.

Grammar::

    formula  := response "~" rhs
    response := "log10" "(" name ")" | name
    rhs      := "1" | term ("+" term)*
    term     := factor (":" factor)*
    factor   := "log10" "(" name ")" | "cat" "(" name ")" | "t15" "(" name ")" | name

A bare ``name`` factor is continuous (raw scale) unless the data column is
non-numeric, in which case it resolves to a categorical.  ``t15(x)`` is the
low/high split of ``x`` at 15 (raw scale, strictly-below is "low").  An
interaction ``a:b`` multiplies the expanded columns of its factors; its
constituent main effects must appear earlier in the right-hand side.
The intercept is always present.
"""

import re
from dataclasses import dataclass

from .errors import FormulaError

T15_THRESHOLD = 15.0


@dataclass(frozen=True)
class Var:
    """Continuous covariate, optionally log10-transformed."""

    name: str
    log10: bool = False

    @property
    def label(self):
        return f"log10({self.name})" if self.log10 else self.name


@dataclass(frozen=True)
class Cat:
    """Categorical covariate; levels are fixed when a design is built."""

    name: str

    @property
    def label(self):
        return f"cat({self.name})"


@dataclass(frozen=True)
class T15:
    """Low/high category of a raw-scale variable split strictly below 15."""

    name: str

    @property
    def label(self):
        return f"t15({self.name})"


@dataclass(frozen=True)
class Interaction:
    """Product term; ``parts`` keeps the written order, identity ignores it."""

    parts: tuple

    def __post_init__(self):
        if len(self.parts) < 2:
            raise FormulaError("an interaction needs at least two factors")
        if len(set(self.parts)) != len(self.parts):
            raise FormulaError(f"repeated factor in interaction '{self.label}'")

    @property
    def label(self):
        return ":".join(p.label for p in self.parts)

    @property
    def key(self):
        return frozenset(self.parts)


def term_key(term):
    """Order-insensitive identity of a term."""
    return term.key if isinstance(term, Interaction) else term


def contains(interaction, term):
    """True if ``term`` is a strict constituent of ``interaction``."""
    if not isinstance(interaction, Interaction):
        return False
    parts = set(interaction.parts)
    if isinstance(term, Interaction):
        sub = set(term.parts)
        return sub < parts
    return term in parts


@dataclass(frozen=True)
class ModelFormula:
    """Response plus an ordered sequence of terms (intercept implicit)."""

    response: Var
    terms: tuple

    def __post_init__(self):
        seen = set()
        mains = set()
        for t in self.terms:
            k = term_key(t)
            if k in seen:
                raise FormulaError(f"duplicate term '{t.label}'")
            seen.add(k)
            if isinstance(t, Interaction):
                missing = [p.label for p in t.parts if p not in mains]
                if missing:
                    raise FormulaError(
                        f"interaction '{t.label}' listed before its main effect(s): "
                        + ", ".join(missing)
                    )
            else:
                mains.add(t)

    @property
    def text(self):
        rhs = " + ".join(t.label for t in self.terms) if self.terms else "1"
        return f"{self.response.label} ~ {rhs}"

    def drop(self, term):
        """Formula without ``term`` (matched by identity, order-insensitive)."""
        k = term_key(term)
        kept = tuple(t for t in self.terms if term_key(t) != k)
        if len(kept) == len(self.terms):
            raise FormulaError(f"term '{term.label}' not in formula")
        return ModelFormula(self.response, kept)

    def variable_names(self):
        """All data variables the formula touches, response included."""
        names = {self.response.name}
        for t in self.terms:
            parts = t.parts if isinstance(t, Interaction) else (t,)
            names.update(p.name for p in parts)
        return names

    def covariate_terms(self):
        return self.terms

    def base_factors(self):
        """Distinct base factors (Var/Cat/T15) across all terms."""
        out = []
        seen = set()
        for t in self.terms:
            parts = t.parts if isinstance(t, Interaction) else (t,)
            for p in parts:
                if p not in seen:
                    seen.add(p)
                    out.append(p)
        return out


_TOKEN = re.compile(r"\s*(log10|cat|t15)\s*\(\s*([A-Za-z_][\w.]*)\s*\)\s*|\s*([A-Za-z_][\w.]*|1)\s*")


def _parse_factor(text, numeric_vars):
    m = _TOKEN.fullmatch(text)
    if not m:
        raise FormulaError(f"cannot parse factor '{text.strip()}'")
    func, inner, bare = m.group(1), m.group(2), m.group(3)
    if func == "log10":
        return Var(inner, log10=True)
    if func == "cat":
        return Cat(inner)
    if func == "t15":
        return T15(inner)
    if bare == "1":
        return None
    if numeric_vars is not None and bare not in numeric_vars:
        return Cat(bare)
    return Var(bare, log10=False)


def parse_formula(text, numeric_vars=None):
    """Parse formula text.

    ``numeric_vars`` is the set of variable names known to be numeric; bare
    names outside it become categoricals (so ``site`` works unadorned).  With
    ``numeric_vars=None`` every bare name is treated as continuous.
    """
    if "~" not in text:
        raise FormulaError(f"formula '{text}' lacks '~'")
    lhs, rhs = text.split("~", 1)
    resp = _parse_factor(lhs, None)
    if not isinstance(resp, Var):
        raise FormulaError(f"response must be a plain or log10() variable, got '{lhs.strip()}'")

    terms = []
    for chunk in rhs.split("+"):
        if not chunk.strip():
            raise FormulaError("empty term (stray '+'?)")
        factors = [_parse_factor(f, numeric_vars) for f in chunk.split(":")]
        if any(f is None for f in factors):
            if len(factors) == 1:
                continue  # bare "1": intercept, already implicit
            raise FormulaError("'1' cannot appear inside an interaction")
        terms.append(factors[0] if len(factors) == 1 else Interaction(tuple(factors)))
    return ModelFormula(resp, tuple(terms))
