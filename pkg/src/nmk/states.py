"""Named polarisation states and the initial-pair catalogs used by the witness tables."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .matcore import ket, projector

SQ2 = np.sqrt(2.0)

KETS_1Q = {
    "H": ket(1, 0),
    "V": ket(0, 1),
    "+": ket(1, 1),
    "-": ket(1, -1),
    "R": ket(1, 1j),
    "L": ket(1, -1j),
}


def product_ket(label: str) -> np.ndarray:
    """``"H+"`` -> |H> (x) |+> (photon 1 first)."""
    if len(label) != 2:
        raise KeyError(f"product labels have two characters, got {label!r}")
    return np.kron(KETS_1Q[label[0]], KETS_1Q[label[1]])


def _two_qubit_kets() -> dict[str, np.ndarray]:
    k = {}
    hh, hv, vh, vv = (product_ket(s) for s in ("HH", "HV", "VH", "VV"))
    k["phi+"] = (hh + vv) / SQ2
    k["phi-"] = (hh - vv) / SQ2
    k["psi+"] = (hv + vh) / SQ2
    k["psi-"] = (hv - vh) / SQ2
    k["S1"] = (product_ket("H+") + product_ket("V-")) / SQ2
    k["S2"] = (product_ket("H+") - product_ket("V-")) / SQ2
    k["S3"] = (product_ket("H-") + product_ket("V+")) / SQ2
    k["S4"] = (product_ket("H-") - product_ket("V+")) / SQ2
    return k


KETS_2Q = _two_qubit_kets()


def state(label: str) -> np.ndarray:
    """Density matrix for a label such as ``"H"``, ``"R"``, ``"phi+"``, ``"S3"`` or ``"H+"``."""
    if label in KETS_1Q:
        return projector(KETS_1Q[label])
    if label in KETS_2Q:
        return projector(KETS_2Q[label])
    return projector(product_ket(label))


@dataclass(frozen=True)
class StatePair:
    a: str
    b: str

    @property
    def label(self) -> str:
        return f"{_pretty(self.a)}, {_pretty(self.b)}"

    @property
    def rho_a(self) -> np.ndarray:
        return state(self.a)

    @property
    def rho_b(self) -> np.ndarray:
        return state(self.b)


def _pretty(s: str) -> str:
    greek = {"phi+": "φ+", "phi-": "φ-", "psi+": "ψ+", "psi-": "ψ-"}
    return f"|{greek.get(s, s)}>"


_PAIRS_1Q = [
    ("H", "V"),
    ("H", "+"), ("H", "-"), ("H", "R"), ("H", "L"),
    ("V", "+"), ("V", "-"), ("V", "R"), ("V", "L"),
    ("+", "-"),
    ("+", "R"), ("+", "L"), ("-", "R"), ("-", "L"),
    ("R", "L"),
]

_PAIRS_2Q = [
    ("phi+", "phi-"), ("phi+", "psi+"), ("phi+", "psi-"), ("phi-", "psi+"), ("phi-", "psi-"),
    ("psi+", "psi-"),
    ("S1", "S2"), ("S1", "S3"), ("S1", "S4"), ("S2", "S3"), ("S2", "S4"), ("S3", "S4"),
    ("HH", "VV"), ("HH", "HV"), ("HH", "H+"), ("HH", "HR"),
    ("HH", "++"), ("HH", "RR"),
    ("++", "--"), ("++", "H+"), ("++", "HR"), ("++", "RR"), ("--", "H-"), ("RR", "LL"),
]


@lru_cache(maxsize=None)
def single_qubit_pairs() -> tuple[StatePair, ...]:
    return tuple(StatePair(a, b) for a, b in _PAIRS_1Q)


@lru_cache(maxsize=None)
def two_qubit_pairs() -> tuple[StatePair, ...]:
    return tuple(StatePair(a, b) for a, b in _PAIRS_2Q)


# Rows expected to share one witness value, grouped per class.
REFERENCE_CLASSES_1Q = {
    "HV": [("H", "V")],
    "basis-mixed": [(a, b) for a in "HV" for b in "+-RL"],
    "coherent-antipodal": [("+", "-"), ("R", "L")],
    "coherent-mixed": [("+", "R"), ("+", "L"), ("-", "R"), ("-", "L")],
}

REFERENCE_CLASSES_2Q = {
    "bell": [("phi+", "phi-"), ("phi+", "psi+"), ("phi+", "psi-"), ("phi-", "psi+"), ("phi-", "psi-")],
    "psi-pair": [("psi+", "psi-")],
    "S-a": [("S1", "S2"), ("S3", "S4")],
    "S-b": [("S1", "S3"), ("S1", "S4"), ("S2", "S3"), ("S2", "S4")],
    "product-two": [("HH", "VV"), ("HH", "HV"), ("HH", "H+"), ("HH", "HR")],
    "product-a": [("HH", "++"), ("HH", "RR"), ("++", "HR")],
    "product-b": [("++", "--"), ("++", "H+"), ("++", "RR"), ("--", "H-"), ("RR", "LL")],
}
