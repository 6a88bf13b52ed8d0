"""Simulated Pauli-setting tomography of one- and two-qubit states and processes."""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .matcore import ShapeError, density_matrix, fidelity_pure, kron
from .procrep import I2, X, Y, Z, ProcessRep, apply
from .states import state

PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}
SETTINGS_1Q = ("X", "Y", "Z")
SETTINGS_2Q = tuple(a + b for a in SETTINGS_1Q for b in SETTINGS_1Q)

QPT_INPUTS_1Q = ("H", "V", "+", "R")
QPT_INPUTS_2Q = tuple(a + b for a in QPT_INPUTS_1Q for b in QPT_INPUTS_1Q)


def _eig_projectors(label: str) -> dict[str, np.ndarray]:
    """Outcome label -> projector for a one- or two-qubit Pauli setting."""
    one = {}
    for p in SETTINGS_1Q:
        w, v = np.linalg.eigh(PAULI[p])
        one[p] = {"+": np.outer(v[:, 1], v[:, 1].conj()), "-": np.outer(v[:, 0], v[:, 0].conj())}
    if label in SETTINGS_1Q:
        return dict(one[label])
    if label in SETTINGS_2Q:
        a, b = label
        return {sa + sb: np.kron(one[a][sa], one[b][sb]) for sa in "+-" for sb in "+-"}
    raise ValueError(f"unknown observable {label!r}; expected one of {SETTINGS_1Q + SETTINGS_2Q}")


def outcome_labels(observable: str) -> tuple[str, ...]:
    return tuple(_eig_projectors(observable))


@dataclass(frozen=True)
class MeasurementRecord:
    observable: str
    shots: int
    counts: Mapping[str, float]
    seed: int | None = None

    def __post_init__(self):
        labels = outcome_labels(self.observable)
        if set(self.counts) - set(labels):
            raise ValueError(f"unexpected outcomes {sorted(set(self.counts) - set(labels))} for {self.observable}")
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("counts must be nonnegative")
        if not self.shots > 0:
            raise ValueError("shots must be positive")
        total = sum(self.counts.values())
        if abs(total - self.shots) > 1e-9 * self.shots:
            raise ValueError(f"counts sum to {total}, expected {self.shots}")
        object.__setattr__(self, "counts", {k: self.counts.get(k, 0) for k in labels})

    def frequencies(self) -> dict[str, float]:
        return {k: v / self.shots for k, v in self.counts.items()}


def simulate_counts(rho, observable: str, shots: int, seed: int | None = None) -> MeasurementRecord:
    """Multinomial counts of a Pauli setting; reproducible for a fixed ``seed``."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    r = density_matrix(rho)
    projs = _eig_projectors(observable)
    if next(iter(projs.values())).shape != r.shape:
        raise ShapeError(f"observable {observable} does not act on a {r.shape[0]}-dimensional state")
    p = np.array([max(0.0, np.real(np.trace(q @ r))) for q in projs.values()])
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, p / p.sum())
    return MeasurementRecord(observable, shots, dict(zip(projs, (int(c) for c in counts))), seed)


def exact_record(rho, observable: str) -> MeasurementRecord:
    """Record whose 'counts' are the Born probabilities (infinite-shot limit)."""
    r = np.asarray(rho, dtype=complex)
    projs = _eig_projectors(observable)
    p = {k: max(0.0, float(np.real(np.trace(q @ r)))) for k, q in projs.items()}
    s = sum(p.values())
    return MeasurementRecord(observable, 1, {k: v / s for k, v in p.items()})


def measure_state(rho, shots: int | None, seed: int | None = None) -> list[MeasurementRecord]:
    """All settings for a state; ``shots=None`` gives exact probabilities."""
    d = np.asarray(rho).shape[0]
    settings = SETTINGS_1Q if d == 2 else SETTINGS_2Q
    if shots is None:
        return [exact_record(rho, s) for s in settings]
    seeds = np.random.SeedSequence(seed).generate_state(len(settings)) if seed is not None else [None] * len(settings)
    return [simulate_counts(rho, s, shots, int(sd) if sd is not None else None) for s, sd in zip(settings, seeds)]


def _sign(outcome: str, mask: Sequence[bool]) -> int:
    s = 1
    for o, keep in zip(outcome, mask):
        if keep and o == "-":
            s = -s
    return s


def linear_inversion(records: Iterable[MeasurementRecord]) -> np.ndarray:
    recs = {r.observable: r for r in records}
    if set(recs) >= set(SETTINGS_2Q) and not set(recs) & set(SETTINGS_1Q):
        n, settings = 2, SETTINGS_2Q
    elif set(recs) == set(SETTINGS_1Q):
        n, settings = 1, SETTINGS_1Q
    else:
        missing = sorted(set(SETTINGS_2Q) - set(recs)) if any(len(k) == 2 for k in recs) else sorted(set(SETTINGS_1Q) - set(recs))
        raise ValueError(f"incomplete observable set; missing {missing}")
    d = 2**n
    rho = np.zeros((d, d), dtype=complex)
    for paulis in itertools.product("IXYZ", repeat=n):
        mask = [p != "I" for p in paulis]
        # Average over every setting that measures the non-identity factors.
        vals = []
        for s in settings:
            if all(p == "I" or p == q for p, q in zip(paulis, s)):
                f = recs[s].frequencies()
                vals.append(sum(_sign(o, mask) * v for o, v in f.items()))
        op = PAULI[paulis[0]]
        for p in paulis[1:]:
            op = kron(op, PAULI[p])
        rho += np.mean(vals) * op
    return rho / d


def project_psd(rho: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and renormalise the trace."""
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        raise ValueError("no positive part left after projection")
    return (v * (w / w.sum())) @ v.conj().T


def qst(records: Iterable[MeasurementRecord], project: bool = True) -> np.ndarray:
    rho = linear_inversion(records)
    return project_psd(rho) if project else rho


def qpt(inputs: Sequence[np.ndarray], outputs: Sequence[np.ndarray], project_cp: bool = False) -> ProcessRep:
    """Superoperator fitted to ``outputs[k] = L(inputs[k])`` by linear inversion."""
    if len(inputs) != len(outputs):
        raise ValueError("one output per input state is required")
    a = np.column_stack([np.asarray(r, dtype=complex).reshape(-1) for r in inputs])
    b = np.column_stack([np.asarray(r, dtype=complex).reshape(-1) for r in outputs])
    d2 = a.shape[0]
    if np.linalg.matrix_rank(a, tol=1e-10) < d2:
        raise ValueError(f"input states span rank {np.linalg.matrix_rank(a, tol=1e-10)} < {d2}; not informationally complete")
    s = b @ np.linalg.pinv(a)
    rep = ProcessRep.from_superop(s)
    choi = 0.5 * (rep.choi + rep.choi.conj().T)
    if project_cp:
        choi = project_cptp(choi, rep.dim)
    return ProcessRep.from_choi(choi)


def project_cptp(choi: np.ndarray, d: int) -> np.ndarray:
    """Clip the Choi spectrum, then restore trace preservation.

    With ``T = Tr_out J`` the map ``(T^-1/2 (x) I) J (T^-1/2 (x) I)`` stays
    positive and has ``Tr_out = I`` exactly.
    """
    w, v = np.linalg.eigh(0.5 * (choi + choi.conj().T))
    j = (v * np.clip(w, 0.0, None)) @ v.conj().T
    t = np.einsum("iaja->ij", j.reshape(d, d, d, d))
    tw, tv = np.linalg.eigh(0.5 * (t + t.conj().T))
    if tw[0] <= 1e-12:
        raise ValueError("CP projection left a rank-deficient input marginal")
    a = np.kron((tv / np.sqrt(tw)) @ tv.conj().T, np.eye(d))
    return a @ j @ a.conj().T


def qpt_inputs(dim: int) -> list[np.ndarray]:
    return [state(s) for s in (QPT_INPUTS_1Q if dim == 2 else QPT_INPUTS_2Q)]


def tomography_of_process(p: ProcessRep, shots: int | None, seed: int | None = None,
                          project_states: bool = True, project_cp: bool = True) -> ProcessRep:
    """Simulate QST on the image of every QPT input and reconstruct the process.

    ``shots=None`` uses exact Born probabilities. With finite shots the
    reconstructed map is projected onto CPTP maps by default; a total map is
    CP, and the projection removes shot noise that would otherwise show up as
    spurious negative eigenvalues of the intermediate map.
    """
    ins = qpt_inputs(p.dim)
    ss = np.random.SeedSequence(seed)
    child = ss.spawn(len(ins))
    outs = []
    for rho, c in zip(ins, child):
        sd = int(c.generate_state(1)[0]) if seed is not None else None
        recs = measure_state(apply(p, rho), shots, sd)
        outs.append(qst(recs, project=project_states))
    return qpt(ins, outs, project_cp=project_cp and shots is not None)


def state_fidelity(psi, rho) -> float:
    return fidelity_pure(psi, rho)


# -- settings accounting ---------------------------------------------------------


class Protocol(str, Enum):
    QST1 = "QST1"
    QST2 = "QST2"
    QPT1 = "QPT1"
    QPT2 = "QPT2"
    CRITERION11_1Q = "Criterion11_1q"
    CRITERION11_2Q = "Criterion11_2q"
    WITNESS_1Q = "Witness_1q"
    WITNESS_2Q = "Witness_2q"


@dataclass(frozen=True)
class SettingsBudget:
    protocol: Protocol
    settings: int


def _budget_table() -> dict[Protocol, int]:
    qst1, qst2 = len(SETTINGS_1Q), len(SETTINGS_2Q)
    qpt1, qpt2 = len(QPT_INPUTS_1Q) * qst1, len(QPT_INPUTS_2Q) * qst2
    return {
        Protocol.QST1: qst1,
        Protocol.QST2: qst2,
        Protocol.QPT1: qpt1,
        Protocol.QPT2: qpt2,
        # two process tomographies (t1 and t2) for the intermediate map
        Protocol.CRITERION11_1Q: 2 * qpt1,
        Protocol.CRITERION11_2Q: 2 * qpt2,
        # four state tomographies (two inputs at t1 and t2)
        Protocol.WITNESS_1Q: 4 * qst1,
        Protocol.WITNESS_2Q: 4 * qst2,
    }


def settings_budget(protocol: Protocol | str) -> SettingsBudget:
    try:
        p = Protocol(protocol)
    except ValueError:
        raise ValueError(f"unknown protocol {protocol!r}; expected one of {[q.value for q in Protocol]}") from None
    return SettingsBudget(p, _budget_table()[p])


# -- CSV -------------------------------------------------------------------------

CSV_HEADER = ("observable", "outcome", "count")


def records_to_csv(records: Iterable[MeasurementRecord], out: TextIO | None = None) -> str:
    buf = out or io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        for k, v in r.counts.items():
            w.writerow([r.observable, k, v])
    return buf.getvalue() if out is None else ""


def records_from_csv(text: str | TextIO) -> list[MeasurementRecord]:
    fh = io.StringIO(text) if isinstance(text, str) else text
    rows = list(csv.reader(fh))
    if not rows or tuple(h.strip() for h in rows[0]) != CSV_HEADER:
        raise ValueError(f"expected header {','.join(CSV_HEADER)}")
    grouped: dict[str, dict[str, float]] = {}
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ValueError(f"line {n}: expected 3 fields, got {len(row)}")
        obs, outcome, count = (c.strip() for c in row)
        try:
            val = float(count)
        except ValueError:
            raise ValueError(f"line {n}: count {count!r} is not a number") from None
        grouped.setdefault(obs, {})[outcome] = val
    out = []
    for obs, counts in grouped.items():
        total = sum(counts.values())
        if all(float(c).is_integer() for c in counts.values()):
            counts = {k: int(v) for k, v in counts.items()}
            out.append(MeasurementRecord(obs, int(total), counts))
        else:
            out.append(MeasurementRecord(obs, total, counts))
    return out
