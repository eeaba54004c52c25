"""Scenario configuration and its plain-text ``key = value`` format.

Example::

    # five honest parties
    N = 5
    n = 64
    k = 1
    threshold = 0
    attack = none
    seed = 42
    trials = 100

Blank lines and ``#`` comments are ignored. List values are comma separated
(surrounding brackets optional); bit strings are written as ``0110``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .qubit import Basis

ATTACKS = (
    "none",
    "privacy",
    "fairness_all_but_one",
    "fairness_nonadjacent",
    "outside_intercept_resend",
)

_MAX_SEED = 2**64 - 1


class ConfigError(ValueError):
    """Invalid scenario configuration. ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def exact(value: float) -> Fraction:
    """Exact rational for a user-supplied real, using its shortest decimal form."""
    return Fraction(repr(value)) if isinstance(value, float) else Fraction(value)


def decoy_count(n: int, k: float) -> int:
    """Number of decoys ``k*n``; non-integral products are rejected, not rounded."""
    if k < 0:
        raise ConfigError("k", f"detection rate must be non-negative, got {k}")
    kn = exact(k) * n
    if kn.denominator != 1:
        raise ConfigError("k", f"k·n not an integer (k={k}, n={n}, k·n={float(kn)})")
    return int(kn)


def adjacent_pairs(N: int, ids) -> list[tuple[int, int]]:
    """Pairs of ids that are neighbours on the ring of ``N`` participants."""
    members = sorted(set(ids))
    return [
        (a, b)
        for i, a in enumerate(members)
        for b in members[i + 1 :]
        if (b - a) % N in (1, N - 1)
    ]


@dataclass(frozen=True)
class ScenarioConfig:
    N: int
    n: int
    k: float = 1.0
    threshold: float = 0.0
    attack: str = "none"
    honest_set: Optional[tuple[int, ...]] = None
    desired_key: Optional[object] = None  # tuple of bits or "random"
    seed: int = 0
    trials: int = 1
    # privacy / fairness_all_but_one victim; defaults to N-1
    target: Optional[int] = None
    # outside_intercept_resend: the single tapped hop and the tap basis
    tap_sender: int = 0
    tap_round: int = 1
    tap_basis: Basis = Basis.Z

    def __post_init__(self):
        if self.honest_set is not None:
            object.__setattr__(self, "honest_set", tuple(self.honest_set))
        if self.desired_key is not None and self.desired_key != "random":
            object.__setattr__(self, "desired_key", tuple(self.desired_key))
        object.__setattr__(self, "tap_basis", Basis(self.tap_basis))
        self.validate()

    @property
    def kn(self) -> int:
        return decoy_count(self.n, self.k)

    @property
    def victim(self) -> int:
        return self.N - 1 if self.target is None else self.target

    def replace(self, **changes) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)

    def validate(self) -> None:
        N, n = self.N, self.n
        if N < 3:
            raise ConfigError("N", f"at least 3 participants required, got {N}")
        if n < 1:
            raise ConfigError("n", f"at least one data particle required, got {n}")
        decoy_count(n, self.k)
        if not 0 <= self.threshold <= 1:
            raise ConfigError("threshold", f"must lie in [0, 1], got {self.threshold}")
        if self.attack not in ATTACKS:
            raise ConfigError("attack", f"unknown scenario {self.attack!r}; expected one of {', '.join(ATTACKS)}")
        if not 0 <= self.seed <= _MAX_SEED:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")
        if self.trials < 1:
            raise ConfigError("trials", f"must be at least 1, got {self.trials}")

        if self.attack == "fairness_nonadjacent":
            if not self.honest_set:
                raise ConfigError("honest_set", "required for attack fairness_nonadjacent")
            if len(set(self.honest_set)) != len(self.honest_set):
                raise ConfigError("honest_set", f"duplicate ids in {list(self.honest_set)}")
            bad = [h for h in self.honest_set if not 0 <= h < N]
            if bad:
                raise ConfigError("honest_set", f"ids {bad} outside [0, {N})")
            pairs = adjacent_pairs(N, self.honest_set)
            if pairs:
                a, b = pairs[0]
                raise ConfigError("honest_set", f"participants {a} and {b} are adjacent (mod {N})")
        elif self.honest_set is not None:
            raise ConfigError("honest_set", "only allowed with attack fairness_nonadjacent")

        if self.target is not None and not 0 <= self.target < N:
            raise ConfigError("target", f"{self.target} outside [0, {N})")
        if isinstance(self.desired_key, tuple):
            if len(self.desired_key) != n:
                raise ConfigError("desired_key", f"length {len(self.desired_key)} != n={n}")
            if any(b not in (0, 1) for b in self.desired_key):
                raise ConfigError("desired_key", "must contain only bits")
        if not 0 <= self.tap_sender < N:
            raise ConfigError("tap_sender", f"{self.tap_sender} outside [0, {N})")
        if not 1 <= self.tap_round <= N:
            raise ConfigError("tap_round", f"{self.tap_round} outside [1, {N}]")


_INT_FIELDS = ("N", "n", "seed", "trials", "target", "tap_sender", "tap_round")
_REAL_FIELDS = ("k", "threshold")
_FIELDS = [f.name for f in dataclasses.fields(ScenarioConfig)]


def _parse_value(key: str, raw: str):
    try:
        if key in _INT_FIELDS:
            return int(raw)
        if key in _REAL_FIELDS:
            return float(raw)
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as a number") from None
    if key == "honest_set":
        body = raw.strip("[]").strip()
        try:
            return tuple(int(tok) for tok in body.split(",") if tok.strip())
        except ValueError:
            raise ConfigError(key, f"cannot parse {raw!r} as a list of ids") from None
    if key == "desired_key":
        if raw == "random":
            return raw
        if not raw or set(raw) - {"0", "1"}:
            raise ConfigError(key, f"expected a bit string or 'random', got {raw!r}")
        return tuple(int(c) for c in raw)
    if key == "tap_basis":
        try:
            return Basis(raw.upper())
        except ValueError:
            raise ConfigError(key, f"unknown basis {raw!r}") from None
    return raw


def parse_config(text: str, **overrides) -> ScenarioConfig:
    """Parse the key-value format; ``overrides`` (e.g. from CLI flags) win."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split(sep, 1))
        if key not in _FIELDS:
            raise ConfigError(key, f"unknown key on line {lineno}")
        if key in values:
            raise ConfigError(key, f"duplicate key on line {lineno}")
        values[key] = _parse_value(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    for required in ("N", "n"):
        if required not in values:
            raise ConfigError(required, "missing required key")
    return ScenarioConfig(**values)


def _format_value(value) -> str:
    if isinstance(value, Basis):
        return value.value
    if isinstance(value, float):
        return repr(value)
    if value == "random":
        return value
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def serialize_config(config: ScenarioConfig) -> str:
    lines = []
    for name in _FIELDS:
        value = getattr(config, name)
        if value is None:
            continue
        if name == "desired_key" and value != "random":
            text = "".join(str(b) for b in value)
        else:
            text = _format_value(value)
        lines.append(f"{name} = {text}")
    return "\n".join(lines) + "\n"


def config_to_dict(config: ScenarioConfig) -> dict:
    """JSON-friendly echo of a config."""
    out = {}
    for name in _FIELDS:
        value = getattr(config, name)
        if isinstance(value, Basis):
            value = value.value
        elif name == "desired_key" and isinstance(value, tuple):
            value = "".join(map(str, value))
        elif isinstance(value, tuple):
            value = list(value)
        out[name] = value
    return out


def config_from_dict(data: dict) -> ScenarioConfig:
    data = dict(data)
    if isinstance(data.get("desired_key"), str) and data["desired_key"] != "random":
        data["desired_key"] = tuple(int(c) for c in data["desired_key"])
    return ScenarioConfig(**data)
