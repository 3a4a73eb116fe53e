"""Block-diagonal ensemble observables, partition functions and sampling estimators."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional

import numpy as np

from .integrable import EncodedState

HERMITIAN_TOL = 1e-12


class NonHermitianError(ValueError):
    pass


def subset_mask(subset, n_traj: int) -> np.ndarray:
    """None -> all trajectories; otherwise a boolean mask or an iterable of indices."""
    if subset is None:
        return np.ones(n_traj, dtype=bool)
    arr = np.asarray(subset)
    if arr.dtype == bool:
        if arr.shape != (n_traj,):
            raise ValueError(f"mask length {arr.size} != {n_traj}")
        return arr.copy()
    mask = np.zeros(n_traj, dtype=bool)
    idx = arr.astype(int).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= n_traj):
        raise ValueError(f"subset indices out of range 0..{n_traj - 1}")
    mask[idx] = True
    return mask


@dataclass(frozen=True)
class BlockObservable:
    """f = sum_j |j><j| (x) f^j with Hermitian N x N blocks f^j.

    Only the diagonal-in-j structure is representable. Trajectories outside
    ``mask`` carry a zero block.
    """

    blocks: np.ndarray  # (n_traj, n_modes, n_modes)
    mask: np.ndarray

    def __post_init__(self):
        b = np.array(self.blocks, dtype=complex)
        if b.ndim != 3 or b.shape[1] != b.shape[2]:
            raise ValueError(f"blocks must have shape (n_traj, N, N), got {b.shape}")
        gap = np.abs(b - np.conj(np.swapaxes(b, 1, 2)))
        scale = np.maximum(1.0, np.abs(b).max(axis=(1, 2)))
        bad = np.nonzero(gap.max(axis=(1, 2)) > HERMITIAN_TOL * scale)[0]
        if bad.size:
            raise NonHermitianError(f"block {int(bad[0])} is not Hermitian")
        mask = subset_mask(self.mask, b.shape[0])
        b[~mask] = 0.0
        b.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "blocks", b)
        object.__setattr__(self, "mask", mask)

    @property
    def n_traj(self) -> int:
        return self.blocks.shape[0]

    @property
    def n_modes(self) -> int:
        return self.blocks.shape[1]

    @property
    def n_subset(self) -> int:
        return int(self.mask.sum())

    @classmethod
    def shared(cls, block, n_traj: int, subset=None) -> "BlockObservable":
        block = np.asarray(block, dtype=complex)
        return cls(np.broadcast_to(block, (n_traj,) + block.shape), subset_mask(subset, n_traj))

    @classmethod
    def from_entries(cls, entries: Iterable, n_traj: int, n_modes: int,
                     subset=None) -> "BlockObservable":
        """Build from (j, k, m, value) tuples; j=None applies the entry to every block."""
        b = np.zeros((n_traj, n_modes, n_modes), dtype=complex)
        for j, k, m, v in entries:
            if j is None:
                b[:, k, m] += v
            else:
                b[j, k, m] += v
        return cls(b, subset_mask(subset, n_traj))


def action_observable(k: int, n_traj: int, n_modes: int, subset=None) -> BlockObservable:
    if not 0 <= k < n_modes:
        raise ValueError(f"mode index {k} outside 0..{n_modes - 1}")
    return BlockObservable.from_entries([(None, k, k, 1.0)], n_traj, n_modes, subset)


def energy_observable(omega, n_traj: int, subset=None) -> BlockObservable:
    omega = np.asarray(omega, dtype=float)
    return BlockObservable.shared(np.diag(omega), n_traj, subset)


def coherence_observable(n_traj: int, n_modes: int, subset=None) -> BlockObservable:
    block = np.ones((n_modes, n_modes)) - np.eye(n_modes)
    return BlockObservable.shared(block, n_traj, subset)


def _check_dims(enc: EncodedState, f: BlockObservable):
    if (enc.n_traj, enc.n_modes) != (f.n_traj, f.n_modes):
        raise ValueError(f"observable is ({f.n_traj}, {f.n_modes}) but state is "
                         f"({enc.n_traj}, {enc.n_modes})")


def block_values(enc: EncodedState, f: BlockObservable) -> np.ndarray:
    """<psi^j | f^j | psi^j> for each unit-norm trajectory block."""
    _check_dims(enc, f)
    b = enc.blocks()
    return np.einsum("jk,jkm,jm->j", b.conj(), f.blocks, b).real


def expectation(enc: EncodedState, f: BlockObservable, rescale_by_c: bool = False) -> float:
    """<rho| f |rho> = (1/N_s) sum_j <psi^j| f^j |psi^j>.

    For the entangled encoding the sum runs directly over the amplitude
    blocks of the joint state vector, whose 1/sqrt(N_s) prefactor supplies
    the ensemble weight. With ``rescale_by_c`` each block term is multiplied
    by its action scale c_j.
    """
    _check_dims(enc, f)
    weights = enc.scales if rescale_by_c else np.ones(enc.n_traj)
    if enc.kind == "entangled":
        a = enc.amplitudes.reshape(enc.n_traj, enc.n_modes)
        terms = np.einsum("jk,jkm,jm->j", a.conj(), f.blocks, a)
        return float(np.sum(weights * terms.real))
    return float(np.sum(weights * block_values(enc, f)) / enc.n_traj)


def _empty_subset(f: BlockObservable) -> bool:
    if f.n_subset == 0:
        warnings.warn("empty trajectory subset; returning 0", RuntimeWarning, stacklevel=3)
        return True
    return False


def action_partition(enc: EncodedState, k: int, subset=None) -> float:
    """(1/N_s) sum_{j in subset} I_k^j in physical action units."""
    f = action_observable(k, enc.n_traj, enc.n_modes, subset)
    if _empty_subset(f):
        return 0.0
    return expectation(enc, f, rescale_by_c=True)


def energy_partition(enc: EncodedState, omega, subset=None) -> float:
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (enc.n_modes,):
        raise ValueError(f"need {enc.n_modes} frequencies, got {omega.shape}")
    f = energy_observable(omega, enc.n_traj, subset)
    if _empty_subset(f):
        return 0.0
    return expectation(enc, f, rescale_by_c=True)


def coherence_partition(enc: EncodedState, subset=None) -> float:
    """(1/N_s) sum_j sum_{k != m} sqrt(I_k^j I_m^j) cos(theta_k^j - theta_m^j)."""
    if enc.n_modes < 2:
        warnings.warn("coherence needs at least two modes; returning 0", RuntimeWarning,
                      stacklevel=2)
        return 0.0
    f = coherence_observable(enc.n_traj, enc.n_modes, subset)
    if _empty_subset(f):
        return 0.0
    return expectation(enc, f, rescale_by_c=True)


class EstimateReport(NamedTuple):
    value: float
    stderr: float
    shots: int
    seed: Optional[int]
    n_subset: int


def outcome_distribution(enc: EncodedState, f: BlockObservable, rescale_by_c: bool = False):
    """Outcome values and probabilities of measuring j, then f^j in its eigenbasis."""
    _check_dims(enc, f)
    b = enc.blocks()
    values, probs = [], []
    for j in range(enc.n_traj):
        lam, vec = np.linalg.eigh(f.blocks[j])
        pj = np.abs(vec.conj().T @ b[j]) ** 2
        w = enc.scales[j] if rescale_by_c else 1.0
        values.append(lam * w)
        probs.append(pj / enc.n_traj)
    values = np.concatenate(values)
    probs = np.concatenate(probs)
    return values, probs / probs.sum()


def shot_estimate(enc: EncodedState, f: BlockObservable, shots: int, seed: Optional[int] = None,
                  rescale_by_c: bool = False) -> EstimateReport:
    """Monte Carlo estimate of the expectation from simulated projective measurements."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    values, probs = outcome_distribution(enc, f, rescale_by_c)
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, probs)
    mean = float(counts @ values) / shots
    if shots > 1:
        var = float(counts @ (values - mean) ** 2) / (shots - 1)
        stderr = math.sqrt(max(var, 0.0) / shots)
    else:
        stderr = math.inf
    return EstimateReport(mean, stderr, shots, seed, f.n_subset)


class QaeModel(NamedTuple):
    target_eps: float
    queries: int
    shots: int

    @property
    def ratio(self) -> float:
        return self.queries / self.shots


def qae_query_model(target_eps: float) -> QaeModel:
    """Idealised amplitude-estimation oracle queries, ceil(pi / (2 eps)), next to the
    classical shot count ceil(1 / eps^2)."""
    if not 0 < target_eps < 1:
        raise ValueError("target_eps must lie in (0, 1)")
    return QaeModel(target_eps, math.ceil(math.pi / (2 * target_eps)),
                    math.ceil(1.0 / target_eps ** 2))
