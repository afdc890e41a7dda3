"""Variable bookkeeping shared by every model builder.

A model is built either in ``MASTER`` context, where first-stage quantities
(switch/block/inverter states, DER set-points) are LP variables, or in
``RECOURSE`` context, where they are constants taken from a master solution.
Rows are always written in the same form

    sum_j a_j v_j + sum_k g_k x_k  (sense)  rhs

and the builder either resolves ``x_k`` to a variable (master) or moves
``g_k x*_k`` to the right-hand side (recourse), remembering ``-g_k`` as the
sensitivity of that row's right-hand side to ``x_k``.  Those sensitivities are
the ``A`` of the sub-gradient cuts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping

from ..lp_engine import INF, LinearProgram

MASTER = "MASTER"
RECOURSE = "RECOURSE"

XKey = tuple  # e.g. ("z_bl", 3), ("pg", "g1", "a")

FIRST_STAGE_KINDS = ("z_sw", "z_bl", "z_inv", "pg", "qg")


def render_key(key: tuple) -> str:
    head, *rest = key
    return f"{head}[{','.join(str(r) for r in rest)}]" if rest else str(head)


class VariableIndexer:
    """Stable bijection between semantic keys and LP column indices."""

    def __init__(self):
        self._index: dict[Hashable, int] = {}
        self._keys: list[Hashable] = []

    def __contains__(self, key) -> bool:
        return key in self._index

    def __getitem__(self, key) -> int:
        return self._index[key]

    def get(self, key, default=None):
        return self._index.get(key, default)

    def __len__(self) -> int:
        return len(self._keys)

    def keys(self) -> list:
        return list(self._keys)

    def key_of(self, j: int):
        return self._keys[j]

    def register(self, key, j: int) -> None:
        if key in self._index:
            raise KeyError(f"variable {render_key(key)} registered twice")
        if j != len(self._keys):
            raise ValueError("indices must be registered in order")
        self._index[key] = j
        self._keys.append(key)

    def of_kind(self, kind: str) -> list:
        return [k for k in self._keys if k[0] == kind]


@dataclass
class ModelBuilder:
    name: str
    context: str = MASTER
    x_values: Mapping[XKey, float] | None = None
    lp: LinearProgram = field(init=False)
    index: VariableIndexer = field(init=False)
    couplings: dict[int, dict[XKey, float]] = field(init=False, default_factory=dict)
    binaries: list[int] = field(init=False, default_factory=list)
    # (bus, phase, "p"|"q") -> nodal balance row
    balance_rows: dict[tuple[str, str, str], int] = field(init=False, default_factory=dict)

    def __post_init__(self):
        self.lp = LinearProgram(self.name)
        self.index = VariableIndexer()
        if self.context == RECOURSE and self.x_values is None:
            raise ValueError("recourse models need first-stage values")

    # -- variables --------------------------------------------------------------
    def var(self, key: tuple, lo: float = 0.0, hi: float = INF, cost: float = 0.0) -> int:
        j = self.lp.add_var(lo, hi, cost, render_key(key))
        self.index.register(key, j)
        return j

    def binary(self, key: tuple, cost: float = 0.0) -> int:
        j = self.var(key, 0.0, 1.0, cost)
        self.binaries.append(j)
        return j

    def has(self, key) -> bool:
        return key in self.index

    def __getitem__(self, key) -> int:
        return self.index[key]

    # -- first-stage quantities --------------------------------------------------
    def is_first_stage(self, key: tuple) -> bool:
        return key[0] in FIRST_STAGE_KINDS

    def x_value(self, key: XKey) -> float:
        if self.context == MASTER:
            raise RuntimeError("first-stage values are variables in the master")
        return float(self.x_values.get(key, 0.0))

    # -- rows -------------------------------------------------------------------
    def row(self, terms: Mapping[tuple, float], sense: str, rhs: float, tag: str,
            xterms: Mapping[XKey, float] | None = None) -> int:
        """Add ``sum terms + sum xterms (sense) rhs``.

        ``terms`` keys are model variables; ``xterms`` keys are first-stage
        quantities that are variables in the master and constants otherwise.
        """
        coeffs: dict[int, float] = {}
        for key, a in terms.items():
            j = self.index[key]
            coeffs[j] = coeffs.get(j, 0.0) + a
        coupling: dict[XKey, float] = {}
        if xterms:
            for key, g in xterms.items():
                if g == 0.0:
                    continue
                if self.context == MASTER:
                    j = self.index[key]
                    coeffs[j] = coeffs.get(j, 0.0) + g
                else:
                    rhs -= g * self.x_value(key)
                    coupling[key] = coupling.get(key, 0.0) - g
        i = self.lp.add_row(coeffs, sense, rhs, tag)
        if coupling:
            self.couplings[i] = coupling
        return i
