"""Tour of the hierarchical residual quantizer on toy vectors: codebook
construction, residual scoring, greedy encoding, cumulative decoding, the
temperature schedule, and the training losses."""

import numpy as np

from hrqsum import (QuantizerConfig, decode, decode_dropout, encode,
                    gumbel_temperature, init_codebook, kl_to_uniform,
                    norm_loss, score_level, soft_assign)

config = QuantizerConfig()
codebook = init_codebook(dim=4, levels=3, codebook_size=4, config=config)

print("Codebook: 3 levels x 4 codes x 4 dims")
print("mean codeword norm per level (init decay 0.5^d):",
      np.round(codebook.level_mean_norms(), 4))

x = np.array([0.8, -0.4, 0.3, 0.1])
print("\ninput x =", x)

print("\nLevel-1 scores are negated squared distances to the residual:")
print(np.round(score_level(x, codebook), 4))

path = encode(x, codebook)
print("\ngreedy path:", path)
for depth in range(1, 4):
    z = decode(path[:depth], codebook)
    print(f"  depth {depth}: cumulative embedding residual norm "
          f"{np.linalg.norm(x - z):.4f}")

print("\nany prefix is a valid (coarser) encoding:")
print("  encode(x, depth=1) =", encode(x, codebook, depth=1))
print("  encode(x, depth=2) =", encode(x, codebook, depth=2))

print("\nsoft assignment at tau=1.0 vs tau=0.01 (no noise):")
print("  tau=1.0 :", np.round(soft_assign(x, codebook, temperature=1.0), 4))
print("  tau=0.01:", np.round(soft_assign(x, codebook, temperature=0.01), 4))

print("\ntemperature schedule tau(t) = max(tau0*exp(-t/gamma), tau_min):")
for step in (0, 5_000, 15_000, 23_105, 50_000):
    print(f"  t={step:>6}: tau={gumbel_temperature(step, config):.4f}")

print("\ndepth dropout decodes (p_depth=0.5, varying seeds):")
for seed in range(4):
    z = decode_dropout(path, codebook, p_depth=0.5, seed=seed)
    print(f"  seed {seed}: ||z|| = {np.linalg.norm(z):.4f}")

print("\nKL to uniform: uniform -> 0, one-hot -> log K")
print("  uniform:", kl_to_uniform(np.full(4, 0.25)))
print("  one-hot:", round(kl_to_uniform(np.array([1.0, 0, 0, 0])), 4),
      "= ln 4 =", round(np.log(4), 4))

print("\nnorm loss penalizes deep levels outgrowing shallow ones:")
print("  on the decayed init:", norm_loss(codebook, beta_nl=0.05, gamma_nl=1.5))
