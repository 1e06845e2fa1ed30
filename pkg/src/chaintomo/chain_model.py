"""Hamiltonian families and their reduction to effective flux chains.

Three nearest-neighbor models on a 1-D chain of N spins are supported:

    XX:     H = sum_i J_i (X_i X_{i+1} + Y_i Y_{i+1})
    XY:     H = sum_i (JX_i X_i X_{i+1} + JY_i Y_i Y_{i+1})
    Ising:  H = sum_i JZ_i Z_i Z_{i+1} + sum_i B_i X_i   (transverse field)

For each model the Heisenberg-picture operator of a suitable boundary
observable spreads along an effective linear chain of link strengths
c_1..c_m (a "flux chain"), and the measured single-spin expectation value
depends on the Hamiltonian only through those links.  This module
validates parameter sets and produces the flux chain(s) together with the
observable/preparation pair that probes each of them.

Physics indexing is 1-based in names (J_1 couples sites 1 and 2); array
storage is 0-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import SpecError, ShapeMismatch


class Model(str, Enum):
    XX = "xx"
    XY = "xy"
    ISING_TRANSVERSE = "ising_transverse"


class Observable(str, Enum):
    X1 = "x1"
    Y1 = "y1"
    Z1 = "z1"


class Preparation(str, Enum):
    PLUS_X = "plus_x"
    MINUS_X = "minus_x"
    PLUS_Y = "plus_y"
    MINUS_Y = "minus_y"
    ZERO = "zero"
    ONE = "one"


# observable -> {preparation: sign}; the sign is the one carried into
# <O_1>(t) = sign * alpha_1(t) when spin 1 starts in that eigenstate.
_PROBE_TABLE = {
    Observable.X1: {Preparation.PLUS_X: +1, Preparation.MINUS_X: -1},
    Observable.Y1: {Preparation.PLUS_Y: +1, Preparation.MINUS_Y: -1},
    Observable.Z1: {Preparation.ZERO: +1, Preparation.ONE: -1},
}


@dataclass(frozen=True)
class Probe:
    """Which observable is measured on spin 1 and how spin 1 was prepared.

    The preparation must be an eigenstate of the observable; ``sign`` is +1
    for the +1 eigenstate (plus_x, plus_y, zero) and -1 otherwise.
    """

    observable: Observable
    preparation: Preparation
    sign: int

    def __post_init__(self):
        allowed = _PROBE_TABLE[Observable(self.observable)]
        prep = Preparation(self.preparation)
        if prep not in allowed:
            raise SpecError(
                f"preparation {prep.value} is not an eigenstate of {self.observable}"
            )
        if self.sign != allowed[prep]:
            raise SpecError(
                f"probe sign {self.sign} inconsistent with preparation {prep.value}"
            )

    def to_dict(self) -> dict:
        return {
            "observable": Observable(self.observable).value,
            "preparation": Preparation(self.preparation).value,
            "sign": self.sign,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Probe":
        return cls(
            observable=Observable(d["observable"]),
            preparation=Preparation(d["preparation"]),
            sign=int(d["sign"]),
        )


# coupling-family keys each model requires, with (length, description)
_FAMILY_LAYOUT = {
    Model.XX: {"J": "n-1"},
    Model.XY: {"JX": "n-1", "JY": "n-1"},
    Model.ISING_TRANSVERSE: {"JZ": "n-1", "B": "n"},
}


def _expected_length(code: str, n: int) -> int:
    return n if code == "n" else n - 1


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """A Hamiltonian model identifier plus its named parameter arrays.

    couplings maps family name ("J", "JX", "JY", "JZ", "B") to a float
    array.  With ``allow_signed`` unset all parameters must be strictly
    positive (anti-ferromagnetic convention); setting it relaxes the
    constraint to nonzero, for use when the signs are independently known.
    """

    model: Model
    n_spins: int
    couplings: dict[str, np.ndarray]
    allow_signed: bool = False

    def __post_init__(self):
        conv = {k: np.asarray(v, dtype=float) for k, v in self.couplings.items()}
        object.__setattr__(self, "model", Model(self.model))
        object.__setattr__(self, "couplings", conv)

    def coupling(self, family: str, index: int) -> float:
        """Value of e.g. ("J", 3) -> J_3.  index is 1-based."""
        return float(self.couplings[family][index - 1])

    def to_dict(self) -> dict:
        return {
            "model": self.model.value,
            "n_spins": self.n_spins,
            "couplings": {k: [float(x) for x in v] for k, v in self.couplings.items()},
            "allow_signed": self.allow_signed,
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "ChainSpec":
        try:
            return cls(
                model=Model(d["model"]),
                n_spins=int(d["n_spins"]),
                couplings={k: np.asarray(v, dtype=float) for k, v in d["couplings"].items()},
                allow_signed=bool(d.get("allow_signed", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"malformed chain description: {exc}") from exc

    @classmethod
    def from_json(cls, path: str | Path) -> "ChainSpec":
        p = Path(path)
        if not p.is_file():
            raise SpecError(f"spec file not found: {p}")
        try:
            d = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise SpecError(f"spec file {p} is not valid JSON: {exc}") from exc
        return cls.from_dict(d)


@dataclass(frozen=True, eq=False)
class FluxChain:
    """Effective linear chain of link strengths probed by one observable.

    links holds c_1..c_m; label_map[k] names the Hamiltonian parameter the
    k-th link came from, as a (family, 1-based index) pair.
    """

    links: np.ndarray
    label_map: tuple[tuple[str, int], ...]
    probe: Probe = field(
        default_factory=lambda: Probe(Observable.X1, Preparation.PLUS_X, +1)
    )

    def __post_init__(self):
        arr = np.asarray(self.links, dtype=float)
        object.__setattr__(self, "links", arr)
        if arr.ndim != 1 or arr.size < 1:
            raise SpecError("flux chain needs at least one link")
        if len(self.label_map) != arr.size:
            raise ShapeMismatch(
                f"label_map has {len(self.label_map)} entries for {arr.size} links"
            )
        if np.any(arr == 0.0) or not np.all(np.isfinite(arr)):
            raise SpecError("flux chain links must be nonzero and finite")

    @property
    def m(self) -> int:
        """Number of links."""
        return int(self.links.size)

    @property
    def labels(self) -> tuple[str, ...]:
        """Display names, e.g. ("J_1", "J_2", ...)."""
        return tuple(f"{fam}_{idx}" for fam, idx in self.label_map)


def validate_spec(spec: ChainSpec) -> ChainSpec:
    """Check all ChainSpec invariants; return the argument unchanged.

    Raises SpecError (or its subclass ShapeMismatch) naming the violated
    invariant.
    """
    model = Model(spec.model)
    n = spec.n_spins
    if n < 2:
        raise SpecError(f"n_spins must be at least 2, got {n}")
    layout = _FAMILY_LAYOUT[model]
    extra = set(spec.couplings) - set(layout)
    missing = set(layout) - set(spec.couplings)
    if extra or missing:
        raise ShapeMismatch(
            f"model {model.value} requires coupling families {sorted(layout)}; "
            f"got {sorted(spec.couplings)}"
        )
    for fam, code in layout.items():
        arr = spec.couplings[fam]
        want = _expected_length(code, n)
        if arr.ndim != 1 or arr.size != want:
            raise ShapeMismatch(
                f"{fam} must have length {want} for n_spins={n}, got {arr.size}"
            )
        if not np.all(np.isfinite(arr)):
            raise SpecError(f"{fam} contains non-finite values")
        if spec.allow_signed:
            if np.any(arr == 0.0):
                raise SpecError(f"{fam} contains a zero coupling (chain disconnects)")
        elif np.any(arr <= 0.0):
            raise SpecError(
                f"{fam} must be strictly positive (set allow_signed to permit signs)"
            )
    return spec


def flux_chains(spec: ChainSpec) -> list[FluxChain]:
    """Reduce a validated ChainSpec to its flux chain(s) with probes.

    XX: the probed X_1 operator spreads through (J_1, ..., J_{N-1});
    probe (X1, plus_x, +1).

    XY: two chains.  X_1 commutes with X_1 X_2 but not with Y_1 Y_2, so
    the X1-probed cascade starts on JY and alternates: (JY_1, JX_2,
    JY_3, ...).  The Y1-probed chain is the mirror image (JX_1, JY_2,
    ...).  Together they cover all 2(N-1) parameters exactly once.

    Ising with transverse field: the Z_1 cascade alternates field and
    bond terms, giving (B_1, JZ_1, B_2, JZ_2, ..., B_N) of length 2N-1;
    probe (Z1, zero, +1).
    """
    validate_spec(spec)
    model = Model(spec.model)
    n = spec.n_spins

    if model is Model.XX:
        J = spec.couplings["J"]
        labels = tuple(("J", i) for i in range(1, n))
        return [FluxChain(J, labels, Probe(Observable.X1, Preparation.PLUS_X, +1))]

    if model is Model.XY:
        JX, JY = spec.couplings["JX"], spec.couplings["JY"]

        def alternating(first: str):
            fams = [first if k % 2 == 1 else ("JX" if first == "JY" else "JY")
                    for k in range(1, n)]
            links = np.array(
                [JY[k - 1] if fams[k - 1] == "JY" else JX[k - 1] for k in range(1, n)]
            )
            label = tuple((fams[k - 1], k) for k in range(1, n))
            return links, label

        links_x, label_x = alternating("JY")  # X1 cascade enters through JY_1
        links_y, label_y = alternating("JX")  # Y1 cascade enters through JX_1
        return [
            FluxChain(links_x, label_x, Probe(Observable.X1, Preparation.PLUS_X, +1)),
            FluxChain(links_y, label_y, Probe(Observable.Y1, Preparation.PLUS_Y, +1)),
        ]

    # transverse-field Ising: interleave B_1, JZ_1, B_2, ..., B_N
    JZ, B = spec.couplings["JZ"], spec.couplings["B"]
    links = np.empty(2 * n - 1)
    links[0::2] = B
    links[1::2] = JZ
    label = []
    for i in range(1, n + 1):
        label.append(("B", i))
        if i < n:
            label.append(("JZ", i))
    return [FluxChain(links, tuple(label), Probe(Observable.Z1, Preparation.ZERO, +1))]


def parameter_names(spec: ChainSpec) -> tuple[str, ...]:
    """All parameter display names of a spec, in chain-traversal order."""
    names: list[str] = []
    for fc in flux_chains(spec):
        names.extend(fc.labels)
    return tuple(names)
