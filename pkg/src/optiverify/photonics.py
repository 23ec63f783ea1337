"""Amplitude-level simulation of one- and two-photon linear optics.

Modes are 0-based here. A single photon over ``M`` modes is a unit vector of
``M`` complex amplitudes; a circuit is an ordered list of sparse mode
operations, each acting as ``psi_out = U @ psi_in`` with the columns of ``U``
giving the image of each input mode.

Imperfections are applied per detection window:

* loss: each photon survives independently with probability ``eta``;
* visibility: with probability ``visibility`` the surviving photons interfere
  ideally, otherwise they route classically (input mode drawn from
  ``|psi|**2``, output from ``|U|**2``, bosonic bunching switched off);
* dark counts: each detector fires independently with probability ``p_dark``.

A dark click is recorded exactly like a photon click.
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

NORM_TOL = 1e-10
_DENSE_LIMIT = 64

_MIXER = 0.5 * np.array(
    [[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]], dtype=float
)


class PhotonState:
    """Single photon in superposition over ``len(self)`` modes."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes: Sequence[complex] | np.ndarray, *, check: bool = True):
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        if amps.size < 1:
            raise ValueError("a photon state needs at least one mode")
        if check and abs(np.linalg.norm(amps) - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalised (norm {np.linalg.norm(amps):.3g})")
        amps.setflags(write=False)
        self.amplitudes = amps

    def __len__(self) -> int:
        return self.amplitudes.size

    def __repr__(self) -> str:
        return f"PhotonState({np.round(self.amplitudes, 6).tolist()})"

    def __eq__(self, other) -> bool:
        return isinstance(other, PhotonState) and np.array_equal(self.amplitudes, other.amplitudes)

    def __hash__(self) -> int:
        return hash(self.amplitudes.tobytes())

    def inner(self, other: "PhotonState") -> complex:
        """``<self|other>``."""
        if len(self) != len(other):
            raise ValueError("dimension mismatch")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    @classmethod
    def basis(cls, m: int, size: int) -> "PhotonState":
        v = np.zeros(size, dtype=complex)
        v[m] = 1.0
        return cls(v)

    @classmethod
    def normalized(cls, amplitudes) -> "PhotonState":
        v = np.asarray(amplitudes, dtype=complex)
        return cls(v / np.linalg.norm(v))


# -- circuit operations --------------------------------------------------------

@dataclass(frozen=True)
class Permutation:
    """Input mode ``i`` is routed to output mode ``perm[i]``."""

    perm: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "perm", tuple(int(p) for p in self.perm))
        if sorted(self.perm) != list(range(len(self.perm))):
            raise ValueError("not a permutation")

    @property
    def modes(self) -> tuple[int, ...]:
        return tuple(range(len(self.perm)))

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.perm)
        for i, p in enumerate(self.perm):
            inv[p] = i
        return Permutation(tuple(inv))

    def matrix(self) -> np.ndarray:
        n = len(self.perm)
        u = np.zeros((n, n))
        u[list(self.perm), list(range(n))] = 1.0
        return u

    def apply(self, amps: np.ndarray) -> np.ndarray:
        out = np.empty_like(amps)
        out[list(self.perm)] = amps
        return out

    def act(self, amps: np.ndarray) -> None:
        amps[list(self.perm)] = amps.copy()


@dataclass(frozen=True)
class PhaseFlip:
    modes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))
        if len(set(self.modes)) != len(self.modes):
            raise ValueError("repeated mode in PhaseFlip")

    def matrix(self) -> np.ndarray:
        return -np.eye(len(self.modes))

    def apply(self, amps: np.ndarray) -> np.ndarray:
        out = amps.copy()
        self.act(out)
        return out

    def act(self, amps: np.ndarray) -> None:
        amps[list(self.modes)] *= -1


@dataclass(frozen=True)
class Splitter:
    """Real two-mode rotation: ``a_i -> cos a'_i + sin a'_j``, ``a_j -> sin a'_i - cos a'_j``.

    ``theta = pi/4`` is the 50:50 splitter.
    """

    i: int
    j: int
    theta: float = math.pi / 4

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("splitter needs two distinct modes")

    @property
    def modes(self) -> tuple[int, int]:
        return (self.i, self.j)

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, s], [s, -c]])

    def apply(self, amps: np.ndarray) -> np.ndarray:
        out = amps.copy()
        self.act(out)
        return out

    def act(self, amps: np.ndarray) -> None:
        c, s = math.cos(self.theta), math.sin(self.theta)
        a, b = amps[self.i].copy(), amps[self.j].copy()
        amps[self.i] = c * a + s * b
        amps[self.j] = s * a - c * b


@dataclass(frozen=True)
class FourModeMixer:
    """Fixed 4x4 mixer; output ``i`` (first mode) is the satisfiability mode."""

    i: int
    j: int
    k: int
    l: int

    def __post_init__(self):
        if len(set(self.modes)) != 4:
            raise ValueError("mixer needs four distinct modes")

    @property
    def modes(self) -> tuple[int, int, int, int]:
        return (self.i, self.j, self.k, self.l)

    def matrix(self) -> np.ndarray:
        return _MIXER.copy()

    def apply(self, amps: np.ndarray) -> np.ndarray:
        out = amps.copy()
        self.act(out)
        return out

    def act(self, amps: np.ndarray) -> None:
        idx = list(self.modes)
        amps[idx] = np.tensordot(_MIXER, amps[idx], axes=1)


CircuitOp = Union[Permutation, PhaseFlip, Splitter, FourModeMixer]


@dataclass(frozen=True)
class Circuit:
    num_modes: int
    ops: tuple[CircuitOp, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            if isinstance(op, Permutation):
                if len(op.perm) != self.num_modes:
                    raise ValueError("permutation size does not match circuit")
            elif any(not 0 <= m < self.num_modes for m in op.modes):
                raise ValueError(f"{op} references a mode outside 0..{self.num_modes - 1}")

    def __len__(self) -> int:
        return len(self.ops)

    def apply(self, amps: np.ndarray) -> np.ndarray:
        """Apply to a vector or, column-wise, to a matrix. Returns a new array."""
        if amps.shape[0] != self.num_modes:
            raise ValueError(f"state has {amps.shape[0]} modes, circuit has {self.num_modes}")
        out = np.array(amps, dtype=complex)
        for op in self.ops:
            op.act(out)
        return out

    def propagate(self, amps: np.ndarray) -> np.ndarray:
        """Same as :meth:`apply`; small circuits go through the cached unitary."""
        if self.num_modes <= _DENSE_LIMIT:
            return self.unitary @ amps
        return self.apply(amps)

    @cached_property
    def unitary(self) -> np.ndarray:
        return self.apply(np.eye(self.num_modes, dtype=complex))

    @cached_property
    def routing(self) -> np.ndarray:
        """Classical transition matrix ``|U|**2`` (column = input mode)."""
        return np.abs(self.unitary) ** 2

    def depth(self) -> int:
        """Layers after as-soon-as-possible scheduling on modes."""
        ready = [0] * self.num_modes
        for op in self.ops:
            ms = op.modes
            layer = max(ready[m] for m in ms) + 1
            for m in ms:
                ready[m] = layer
        return max(ready, default=0)

    def to_json(self) -> str:
        return json.dumps({"num_modes": self.num_modes, "ops": [_op_record(op) for op in self.ops]})


def _op_record(op: CircuitOp) -> dict:
    if isinstance(op, Permutation):
        return {"op": "permutation", "perm": list(op.perm)}
    if isinstance(op, PhaseFlip):
        return {"op": "phase_flip", "modes": list(op.modes)}
    if isinstance(op, Splitter):
        return {"op": "splitter", "modes": [op.i, op.j], "theta": op.theta}
    return {"op": "four_mode_mixer", "modes": list(op.modes)}


# -- states --------------------------------------------------------------------

def equal_superposition(n: int) -> PhotonState:
    if n < 1:
        raise ValueError("N must be >= 1")
    return PhotonState(np.full(n, 1 / math.sqrt(n)))


def encode_proof(x: Sequence[int]) -> PhotonState:
    """Proper state with amplitudes ``(-1)**x_i / sqrt(N)``."""
    if len(x) == 0:
        raise ValueError("empty assignment")
    signs = 1 - 2 * np.asarray(x, dtype=float)
    return PhotonState(signs / math.sqrt(len(x)))


def build_cascade(n: int) -> Circuit:
    """Splitter tree taking a photon in mode 0 to ``equal_superposition(n)``.

    A node covering ``m`` leaves sends ``floor(m/2)/m`` of its weight to its
    own subtree and the rest to the subtree rooted at mode ``floor(m/2)``, so
    leaves come out exactly equal for any ``n``. ``n - 1`` splitters, depth
    ``ceil(log2 n)``.
    """
    if n < 1:
        raise ValueError("N must be >= 1")
    levels: list[list[Splitter]] = []

    def grow(root: int, size: int, level: int) -> None:
        if size == 1:
            return
        left = size // 2
        while len(levels) <= level:
            levels.append([])
        levels[level].append(Splitter(root, root + left, math.acos(math.sqrt(left / size))))
        grow(root, left, level + 1)
        grow(root + left, size - left, level + 1)

    grow(0, n, 0)
    return Circuit(n, tuple(op for lvl in levels for op in lvl))


def apply_circuit(state: PhotonState, circuit: Circuit) -> PhotonState:
    return PhotonState(circuit.apply(state.amplitudes.copy()), check=False)


def output_distribution(state: PhotonState | np.ndarray) -> np.ndarray:
    amps = state.amplitudes if isinstance(state, PhotonState) else np.asarray(state)
    return np.abs(amps) ** 2


# -- imperfections and detection -----------------------------------------------

@dataclass(frozen=True)
class ImperfectionParams:
    eta: float = 1.0
    p_dark: float = 0.0
    visibility: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if not 0.0 <= self.p_dark < 1.0:
            raise ValueError("p_dark must lie in [0, 1)")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError("visibility must lie in [0, 1]")

    @property
    def ideal(self) -> bool:
        return self.eta == 1.0 and self.p_dark == 0.0 and self.visibility == 1.0


IDEAL = ImperfectionParams()


@dataclass(frozen=True)
class DetectionEvent:
    clicks: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "clicks", tuple(sorted(int(c) for c in self.clicks)))

    def __len__(self) -> int:
        return len(self.clicks)

    def count(self, mode: int) -> int:
        return self.clicks.count(mode)


def _draw(probs: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(probs)
    k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(k, probs.size - 1)


def _route_classically(amps: np.ndarray, circuit: Circuit | None, rng) -> int:
    m = _draw(np.abs(amps) ** 2, rng)
    if circuit is None:
        return m
    return _draw(circuit.routing[:, m], rng)


def two_photon_output_probs(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Joint click distribution for the product state ``a+(u) a+(v)|0>``.

    Returns an upper-triangular matrix ``P`` with ``P[o, o']``
    (``o <= o'``) the probability of clicks in modes ``o`` and ``o'``.
    """
    amp = np.outer(u, v)
    pair = np.abs(amp + amp.T) ** 2
    probs = np.triu(pair, 1)
    probs[np.diag_indices_from(probs)] = 2 * np.abs(np.diag(amp)) ** 2
    return probs / probs.sum()


def detect(
    photons: Sequence[np.ndarray],
    circuit: Circuit | None,
    imp: ImperfectionParams,
    rng: np.random.Generator,
    num_modes: int | None = None,
) -> DetectionEvent:
    """Send labelled photons through ``circuit`` and read every detector.

    Up to two surviving photons interfere exactly. Three or more are routed
    classically; every test rejects such events on click count alone.
    """
    if num_modes is None:
        num_modes = circuit.num_modes if circuit is not None else len(photons[0])
    survivors = [p for p in photons if imp.eta >= 1.0 or rng.random() < imp.eta]
    clicks: list[int] = []
    if survivors:
        coherent = imp.visibility >= 1.0 or rng.random() < imp.visibility
        if coherent and len(survivors) == 1:
            out = circuit.propagate(survivors[0]) if circuit is not None else survivors[0]
            clicks.append(_draw(np.abs(out) ** 2, rng))
        elif coherent and len(survivors) == 2:
            u, v = survivors
            if circuit is not None:
                u, v = circuit.propagate(u), circuit.propagate(v)
            probs = two_photon_output_probs(u, v)
            k = _draw(probs.reshape(-1), rng)
            clicks.extend(divmod(k, num_modes))
        else:
            clicks.extend(_route_classically(p, circuit, rng) for p in survivors)
    if imp.p_dark > 0:
        fired = np.flatnonzero(rng.random(num_modes) < imp.p_dark)
        clicks.extend(int(m) for m in fired)
    return DetectionEvent(tuple(clicks))


def sample_single_photon(
    state: PhotonState,
    imp: ImperfectionParams,
    rng: np.random.Generator,
    circuit: Circuit | None = None,
) -> DetectionEvent:
    """Detect one photon prepared in ``state`` after an optional ``circuit``."""
    return detect([state.amplitudes], circuit, imp, rng, len(state))


# -- two-photon symmetry geometry ----------------------------------------------

@functools.lru_cache(maxsize=32)
def pairing_circuit(n: int) -> Circuit:
    """Interleave two N-mode registers and 50:50-split each mode pair.

    Register A occupies modes ``0..N-1`` and register B ``N..2N-1``. After the
    circuit, even outputs ``2i`` are the "up" detectors and odd outputs
    ``2i + 1`` the "down" detectors of pair ``i``.
    """
    perm = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
    ops: list[CircuitOp] = [Permutation(tuple(perm))]
    ops += [Splitter(2 * i, 2 * i + 1) for i in range(n)]
    return Circuit(2 * n, tuple(ops))


def embed(state: PhotonState | np.ndarray, offset: int, size: int) -> np.ndarray:
    amps = state.amplitudes if isinstance(state, PhotonState) else np.asarray(state)
    out = np.zeros(size, dtype=complex)
    out[offset:offset + amps.size] = amps
    return out


def is_coincidence(event: DetectionEvent) -> bool:
    """Clicks on both an up (even) and a down (odd) detector."""
    parities = {c % 2 for c in event.clicks}
    return len(parities) == 2


def two_photon_coincidence_prob(psi: PhotonState, phi: PhotonState, visibility: float = 1.0) -> float:
    """Probability of an up/down coincidence when ``psi`` meets ``phi`` mode by mode.

    The amplitude for (up ``a``, down ``b``) is ``(psi_b phi_a - psi_a phi_b)/2``;
    ``visibility`` scales the interference (cross) term of its square. At
    visibility 1 this is ``(1 - |<psi|phi>|**2)/2``; at 0 it is the
    distinguishable-photon value 1/2.
    """
    if len(psi) != len(phi):
        raise ValueError("dimension mismatch")
    p, f = psi.amplitudes, phi.amplitudes
    direct = np.abs(np.outer(f, p)) ** 2 + np.abs(np.outer(p, f)) ** 2
    cross = 2 * np.real(np.outer(f, p) * np.conj(np.outer(p, f)))
    return float(np.sum(direct - visibility * cross) / 4)


def sample_symmetry_pair(
    psi: PhotonState,
    phi: PhotonState,
    imp: ImperfectionParams,
    rng: np.random.Generator,
) -> tuple[DetectionEvent, bool, int]:
    if len(psi) != len(phi):
        raise ValueError("dimension mismatch")
    n = len(psi)
    photons = [embed(psi, 0, 2 * n), embed(phi, n, 2 * n)]
    event = detect(photons, pairing_circuit(n), imp, rng)
    return event, is_coincidence(event), len(event)
