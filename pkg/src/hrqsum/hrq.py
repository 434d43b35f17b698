"""Hierarchical residual quantizer: codebook, residual scoring, greedy
path encoding, cumulative decoding, training regularizers, and codebook
fitting on fixed embeddings.

A sentence embedding x is encoded as a path of discrete codes, one per
level. Level d scores each codeword against the residual left after
subtracting the codewords chosen at levels < d:

    s_d(q) = -|| (x - sum_{d'<d} C_{d'}(q_{d'})) - C_d(q) ||^2

and decoding sums the chosen codewords back up. Deeper levels therefore
refine the cumulative embedding, and any prefix of a path is itself a
valid (coarser) encoding.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .embedder import EmbeddingMatrix

log = logging.getLogger(__name__)

_ENCODE_CHUNK = 1024
# Codewords closer than this (relative to input scale) are numerically
# indistinguishable for assignment purposes; fit snaps them together so
# greedy encoding resolves them by the smallest-index tie rule instead of
# by float noise.
_SNAP_REL_TOL = 1e-6
_COOLDOWN_EPOCHS = 3


@dataclass(frozen=True)
class QuantizerConfig:
    alpha_init: float = 0.5
    tau0: float = 1.0
    tau_min: float = 0.5
    gamma_temp: float = 33333.0
    beta_kl: float = 0.0025
    beta_nl: float = 0.05
    gamma_nl: float = 1.5
    p_depth: float = 0.1
    epochs: int = 20
    seed: int = 0
    gumbel: bool = True

    def __post_init__(self):
        if self.tau_min > self.tau0:
            raise ValueError("tau_min must not exceed tau0")
        if self.tau_min <= 0 or self.gamma_temp <= 0:
            raise ValueError("tau_min and gamma_temp must be positive")
        for name in ("beta_kl", "beta_nl", "gamma_nl", "alpha_init"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 <= self.p_depth <= 1.0:
            raise ValueError("p_depth must be in [0, 1]")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class Codebook:
    levels: int
    codebook_size: int
    dim: int
    embeddings: np.ndarray  # (levels, codebook_size, dim) float64
    seed: int
    fit_config: QuantizerConfig

    def __post_init__(self):
        arr = np.asarray(self.embeddings, dtype=np.float64)
        expected = (self.levels, self.codebook_size, self.dim)
        if arr.shape != expected:
            raise ValueError(f"codebook shape {arr.shape} != {expected}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("codebook contains non-finite values")
        self.embeddings = arr

    def level_mean_norms(self) -> np.ndarray:
        return np.linalg.norm(self.embeddings, axis=2).mean(axis=1)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "levels": self.levels,
            "codebook_size": self.codebook_size,
            "seed": self.seed,
            "config": asdict(self.fit_config),
            "embeddings": self.embeddings.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Codebook":
        return cls(
            levels=data["levels"],
            codebook_size=data["codebook_size"],
            dim=data["dim"],
            embeddings=np.asarray(data["embeddings"], dtype=np.float64),
            seed=data["seed"],
            fit_config=QuantizerConfig(**data["config"]),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_json(), handle)
            handle.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "Codebook":
        with open(path, encoding="utf-8") as handle:
            return cls.from_json(json.load(handle))


def init_codebook(dim: int, levels: int, codebook_size: int,
                  config: QuantizerConfig) -> Codebook:
    """Seeded unit-hypersphere initialization, with level d scaled by
    alpha_init^(d-1) so deeper levels start smaller."""
    if levels < 1 or codebook_size < 2:
        raise ValueError("need levels >= 1 and codebook_size >= 2")
    rng = np.random.default_rng(config.seed)
    emb = rng.standard_normal((levels, codebook_size, dim))
    norms = np.linalg.norm(emb, axis=2, keepdims=True)
    norms[norms == 0.0] = 1.0
    emb /= norms
    scales = config.alpha_init ** np.arange(levels, dtype=np.float64)
    emb *= scales[:, None, None]
    return Codebook(levels=levels, codebook_size=codebook_size, dim=dim,
                    embeddings=emb, seed=config.seed, fit_config=config)


def _check_path(path, codebook: Codebook, max_depth: int | None = None) -> tuple:
    codes = tuple(int(c) for c in path)
    limit = codebook.levels if max_depth is None else max_depth
    if not 1 <= len(codes) <= limit:
        raise ValueError(f"path depth {len(codes)} out of range 1..{limit}")
    for code in codes:
        if not 0 <= code < codebook.codebook_size:
            raise ValueError(f"code {code} out of range 0..{codebook.codebook_size - 1}")
    return codes


def score_level(x: np.ndarray, codebook: Codebook, path_prefix=()) -> np.ndarray:
    """Negated squared distance from each level-d codeword to the residual
    after the prefix (d = len(prefix) + 1)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (codebook.dim,):
        raise ValueError(f"embedding shape {x.shape} != ({codebook.dim},)")
    prefix = tuple(int(c) for c in path_prefix)
    if len(prefix) >= codebook.levels:
        raise ValueError("prefix depth must be < levels")
    residual = x.copy()
    for d, code in enumerate(prefix):
        if not 0 <= code < codebook.codebook_size:
            raise ValueError(f"code {code} out of range")
        residual -= codebook.embeddings[d, code]
    diff = residual[None, :] - codebook.embeddings[len(prefix)]
    return -np.sum(diff * diff, axis=1)


def encode(x: np.ndarray, codebook: Codebook, depth: int | None = None) -> tuple[int, ...]:
    """Greedy per-level argmax of score_level; ties go to the smallest
    code index. encode(x, d) is always a prefix of encode(x, D)."""
    if depth is None:
        depth = codebook.levels
    if not 1 <= depth <= codebook.levels:
        raise ValueError(f"depth {depth} out of range 1..{codebook.levels}")
    x = np.asarray(x, dtype=np.float64)
    codes: list[int] = []
    residual = x.copy()
    for d in range(depth):
        diff = residual[None, :] - codebook.embeddings[d]
        scores = -np.sum(diff * diff, axis=1)
        code = int(np.argmax(scores))
        codes.append(code)
        residual -= codebook.embeddings[d, code]
    return tuple(codes)


def encode_batch(matrix: EmbeddingMatrix | np.ndarray, codebook: Codebook,
                 depth: int | None = None) -> np.ndarray:
    """Vectorized greedy encoding; returns an (n, depth) int32 path matrix.

    Row results are identical to encode() on each row.
    """
    if depth is None:
        depth = codebook.levels
    values = matrix.values if isinstance(matrix, EmbeddingMatrix) else matrix
    x = np.asarray(values, dtype=np.float64)
    n = x.shape[0]
    paths = np.empty((n, depth), dtype=np.int32)
    for start in range(0, n, _ENCODE_CHUNK):
        chunk = x[start:start + _ENCODE_CHUNK].copy()
        for d in range(depth):
            diff = chunk[:, None, :] - codebook.embeddings[d][None, :, :]
            dists = np.sum(diff * diff, axis=2)
            codes = np.argmin(dists, axis=1)
            paths[start:start + _ENCODE_CHUNK, d] = codes
            chunk -= codebook.embeddings[d][codes]
    return paths


def decode(path, codebook: Codebook) -> np.ndarray:
    """Cumulative embedding of a (sub)path: the sum of its codewords."""
    codes = _check_path(path, codebook)
    z = np.zeros(codebook.dim, dtype=np.float64)
    for d, code in enumerate(codes):
        z += codebook.embeddings[d, code]
    return z


def decode_batch(paths: np.ndarray, codebook: Codebook) -> np.ndarray:
    paths = np.asarray(paths)
    z = np.zeros((paths.shape[0], codebook.dim), dtype=np.float64)
    for d in range(paths.shape[1]):
        z += codebook.embeddings[d][paths[:, d]]
    return z


def decode_dropout(path, codebook: Codebook, p_depth: float, seed: int) -> np.ndarray:
    """Decode with random depth truncation: level d keeps its contribution
    only while every level at or above it drew gamma=1 ~ Bernoulli(1-p)."""
    codes = _check_path(path, codebook)
    if not 0.0 <= p_depth <= 1.0:
        raise ValueError("p_depth must be in [0, 1]")
    rng = np.random.default_rng(seed)
    gamma = (rng.random(len(codes)) >= p_depth).astype(np.float64)
    keep = np.cumprod(gamma)
    z = np.zeros(codebook.dim, dtype=np.float64)
    for d, code in enumerate(codes):
        z += keep[d] * codebook.embeddings[d, code]
    return z


def gumbel_temperature(step: int, config: QuantizerConfig) -> float:
    """Annealing schedule: max(tau0 * exp(-step / gamma_temp), tau_min)."""
    if step < 0:
        raise ValueError("step must be >= 0")
    return max(config.tau0 * math.exp(-step / config.gamma_temp), config.tau_min)


def soft_assign(x: np.ndarray, codebook: Codebook, path_prefix=(),
                temperature: float = 1.0, noise_seed: int | None = None) -> np.ndarray:
    """softmax((s + g) / tau) over codes at the prefix's next level, where
    g are seeded Gumbel(0,1) draws, or zero when noise_seed is None."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    scores = score_level(x, codebook, path_prefix)
    if noise_seed is not None:
        scores = scores + np.random.default_rng(noise_seed).gumbel(size=scores.shape)
    return _softmax(scores / temperature)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=-1, keepdims=True)


def kl_to_uniform(assignment: np.ndarray) -> float:
    """D_KL(p || Uniform(K)) = log K - H(p), in nats; 0 for uniform p."""
    p = np.asarray(assignment, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise ValueError("assignment must be a 1-D probability vector")
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-6:
        raise ValueError("assignment is not a probability vector")
    p = np.clip(p, 0.0, None)
    nonzero = p > 0.0
    entropy = -np.sum(p[nonzero] * np.log(p[nonzero]))
    return float(np.log(p.size) - entropy)


def norm_loss(codebook: Codebook, beta_nl: float, gamma_nl: float) -> float:
    """Penalty on deep levels outgrowing shallow ones:
    (beta/D) * sum_{d>=2} [max(gamma * |C_d| / |C_{d-1}|, 1) - 1]^2,
    where |C_d| is the mean codeword norm of level d."""
    if codebook.levels < 2:
        raise ValueError("norm loss needs at least 2 levels")
    means = codebook.level_mean_norms()
    total = 0.0
    for d in range(1, codebook.levels):
        if means[d - 1] == 0.0:
            ratio = 0.0 if means[d] == 0.0 else np.inf
        else:
            ratio = means[d] / means[d - 1]
        total += (max(gamma_nl * ratio, 1.0) - 1.0) ** 2
    return beta_nl / codebook.levels * total


@dataclass
class EpochStats:
    epoch: int
    recon: float
    kl: float
    norm_loss: float
    tau: float


@dataclass
class FitReport:
    epochs: list[EpochStats] = field(default_factory=list)
    degenerate_input: bool = False

    def to_json(self) -> dict:
        return {
            "degenerate_input": self.degenerate_input,
            "epochs": [asdict(e) for e in self.epochs],
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_json(), handle)
            handle.write("\n")


def _neg_sq_dists(points: np.ndarray, codewords: np.ndarray) -> np.ndarray:
    out = np.empty((points.shape[0], codewords.shape[0]), dtype=np.float64)
    for start in range(0, points.shape[0], _ENCODE_CHUNK):
        chunk = points[start:start + _ENCODE_CHUNK]
        diff = chunk[:, None, :] - codewords[None, :, :]
        out[start:start + _ENCODE_CHUNK] = -np.sum(diff * diff, axis=2)
    return out


def _fit_scale(x: np.ndarray, config: QuantizerConfig, max_rows: int = 16384) -> float:
    """Squared rescaling factor standardizing the data for the temperature
    schedule.

    Soft responsibility updates only resolve structure whose covariance
    eigenvalue exceeds tau/2; below that the uniform (fully collapsed)
    assignment is the stable fixed point. Embedding scale is arbitrary, so
    fit rescales inputs to put the smallest above-noise-floor eigenvalue at
    tau0, which keeps genuine structure splittable across the whole
    schedule while isotropic noise directions still collapse.
    """
    n = x.shape[0]
    if n > max_rows:
        idx = np.random.default_rng([config.seed, 5]).choice(n, max_rows,
                                                             replace=False)
        x = x[np.sort(idx)]
    if x.shape[0] < 2:
        return 1.0
    cov = np.cov(x, rowvar=False)
    cov = np.atleast_2d(cov)
    eigs = np.sort(np.linalg.eigvalsh(cov))[::-1]
    top = eigs[0]
    if not np.isfinite(top) or top <= 0.0:
        return 1.0
    floor = max(eigs[-1], top * 1e-9)
    structure = eigs[eigs >= 10.0 * floor]
    smallest = structure[-1] if structure.size else top
    return float(np.clip(config.tau0 / smallest, 1e-9, 1e12))


def _shrink_norms(emb: np.ndarray, gamma_nl: float) -> None:
    # Hard counterpart of the norm loss: cap each level's mean codeword
    # norm at gamma_nl times the previous level's.
    for d in range(1, emb.shape[0]):
        prev = np.linalg.norm(emb[d - 1], axis=1).mean()
        cur = np.linalg.norm(emb[d], axis=1).mean()
        if cur > gamma_nl * prev:
            emb[d] *= 0.0 if cur == 0.0 else gamma_nl * prev / cur


def _snap_duplicates(emb: np.ndarray, tols) -> None:
    # Union codewords within tolerance of each other and overwrite each
    # group with its mean so their scores become bit-identical and greedy
    # encoding resolves them by the smallest-index tie rule.
    for d in range(emb.shape[0]):
        tol = float(tols[d])
        level = emb[d]
        k = level.shape[0]
        group = list(range(k))

        def find(i):
            while group[i] != i:
                group[i] = group[group[i]]
                i = group[i]
            return i

        for i in range(k):
            for j in range(i + 1, k):
                if np.linalg.norm(level[i] - level[j]) <= tol:
                    ri, rj = find(i), find(j)
                    if ri != rj:
                        group[max(ri, rj)] = min(ri, rj)
        roots: dict[int, list[int]] = {}
        for i in range(k):
            roots.setdefault(find(i), []).append(i)
        for members in roots.values():
            if len(members) > 1:
                level[members] = level[members].mean(axis=0)


def fit(embeddings: EmbeddingMatrix, levels: int, codebook_size: int,
        config: QuantizerConfig) -> tuple[Codebook, FitReport]:
    """Fit a codebook by alternating soft assignment and codeword updates.

    Each epoch runs level by level on residuals: responsibilities are a
    Gumbel-perturbed softmax of the residual scores at the scheduled
    temperature (the perturbation doubles as exploration), mixed toward
    uniform with weight beta_kl; codewords become responsibility-weighted
    residual means; residuals then propagate through the sampled codes.
    Depth dropout excludes each point from levels beyond its sampled
    truncation depth. The final epochs run without noise or dropout so the
    fit settles, and norm shrinkage keeps level norms ordered throughout.
    """
    raw = np.asarray(embeddings.values, dtype=np.float64)
    n, dim = raw.shape
    if n < codebook_size:
        raise ValueError(f"need at least {codebook_size} points, got {n}")
    degenerate = bool(np.all(raw == raw[0]))
    if degenerate:
        log.warning("fit input is degenerate: all %d points identical", n)

    alpha2 = _fit_scale(raw, config)
    scale = math.sqrt(alpha2)
    x = raw * scale
    log.debug("fit: internal scale %.4g (squared %.4g)", scale, alpha2)

    codebook = init_codebook(dim, levels, codebook_size, config)
    emb = codebook.embeddings
    emb *= scale  # init lives on the scaled sphere; unscaled before return
    k = codebook_size
    snap_tol = _SNAP_REL_TOL * max(1.0, float(np.linalg.norm(x, axis=1).mean()))
    cooldown_start = max(config.epochs - _COOLDOWN_EPOCHS, 0)
    report = FitReport(degenerate_input=degenerate)

    for epoch in range(config.epochs):
        cooldown = epoch >= cooldown_start
        tau = gumbel_temperature(epoch * n, config)
        rng = np.random.default_rng([config.seed, 2, epoch])

        if cooldown or config.p_depth == 0.0:
            trunc = np.full(n, levels, dtype=np.int64)
        else:
            dropped = rng.random((n, levels)) < config.p_depth
            first_drop = np.argmax(dropped, axis=1)
            trunc = np.where(dropped.any(axis=1), first_drop, levels)

        residual = x.copy()
        kl_total = 0.0
        level_err = np.zeros(levels)
        for d in range(levels):
            scores = _neg_sq_dists(residual, emb[d])
            if config.gumbel and not cooldown:
                # argmax(s + tau*g) samples softmax(s/tau): exploration
                # perturbs assignments only where scores do not already
                # dominate the noise.
                noisy = scores + tau * rng.gumbel(size=scores.shape)
            else:
                noisy = scores
            resp = _softmax(noisy / tau)

            active = trunc > d
            if active.any():
                clean = resp if noisy is scores else _softmax(scores[active] / tau)
                sub = clean[active] if clean.shape[0] == n else clean
                logp = np.log(np.clip(sub, 1e-300, None))
                kl_total += float(
                    (math.log(k) + np.sum(sub * logp, axis=1)).sum()) / n

            if config.beta_kl > 0.0:
                resp = (1.0 - config.beta_kl) * resp + config.beta_kl / k
            weighted = resp * active[:, None]
            mass = weighted.sum(axis=0)
            nonempty = mass > 1e-12
            new_level = np.zeros((k, dim), dtype=np.float64)
            new_level[nonempty] = (weighted.T @ residual)[nonempty] / mass[nonempty, None]
            if not nonempty.all():
                order = np.argsort(-np.linalg.norm(residual, axis=1), kind="stable")
                for rank, code in enumerate(np.flatnonzero(~nonempty)):
                    new_level[code] = residual[order[rank % n]]
            emb[d] = new_level
            codes = np.argmax(noisy, axis=1)
            residual -= new_level[codes]
            level_err[d] = math.sqrt(float(np.mean(np.sum(residual ** 2, axis=1))))

        _shrink_norms(emb, config.gamma_nl)
        # Codewords separated by a tiny fraction of a level's quantization
        # error are noise partitions, not structure; merge them.
        _snap_duplicates(emb, np.maximum(snap_tol, 0.05 * level_err))

        paths = encode_batch(x, codebook)
        err = x - decode_batch(paths, codebook)
        recon = float(np.mean(np.sum(err * err, axis=1))) / alpha2
        nl = norm_loss(codebook, config.beta_nl, config.gamma_nl) if levels >= 2 else 0.0
        report.epochs.append(EpochStats(epoch=epoch, recon=recon,
                                        kl=config.beta_kl * kl_total,
                                        norm_loss=nl, tau=tau))
        log.debug("epoch %d: recon=%.6g kl=%.6g nl=%.6g tau=%.4f",
                  epoch, recon, config.beta_kl * kl_total, nl, tau)

    emb /= scale  # back to the caller's embedding scale
    return codebook, report
