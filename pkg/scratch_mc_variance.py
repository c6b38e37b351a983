"""Exact mean/std of the 1e5-trial MC bias estimator across the default grid.

The estimator error decomposes as eps = b + A eta with eta the label noise,
so the MC average over T trials is b + A etabar, etabar ~ N(0, sigma^2/T I).
E[MC] = ||b||^2 + (s2/T)||A||_F^2
Var[MC] = 4 (s2/T) ||A^T b||^2 + 2 (s2/T)^2 ||A A^T||_F^2
"""
import numpy as np
from prunekd import data, theory

d, N, lam, noise_std, T = 10, 200, 1.0, 1.0, 10**5
fs = [round(0.1 * k, 1) for k in range(1, 10)]
alphas = [0.25, 0.5, 1.0]
seeds = list(range(50))

worst_inst = 0.0
cell_rows = []
for f in fs:
    for alpha in alphas:
        biases, offsets, variances = [], [], []
        for seed in seeds:
            prob = data.gen_linear_regression(d, N, noise_std, lam, seed=seed)
            n_f = theory.round_half_up(f * N)
            rng = np.random.default_rng((seed, 1))
            idx = np.sort(rng.choice(N, size=n_f, replace=False))
            sv = theory.PrunedView.from_indices(prob, idx)
            tv = theory.PrunedView.from_indices(prob, np.arange(N))
            Xs, Xt = sv.X_f, tv.X_f
            Ms = np.linalg.inv(Xs @ Xs.T + lam * np.eye(d))
            Mt = np.linalg.inv(Xt @ Xt.T + lam * np.eye(d))
            MsXs = Ms @ Xs
            b = MsXs @ Xs.T @ ((1 - alpha) * np.eye(d) + alpha * Mt @ Xt @ Xt.T) @ prob.theta_star - prob.theta_star
            A = np.zeros((d, N))
            A[:, idx] += (1 - alpha) * MsXs
            A += alpha * (Ms @ Xs @ Xs.T @ Mt @ Xt)  # teacher indices = all
            cf = theory.bias_closed_form(prob, sv, tv, alpha)
            nb2 = float(b @ b)
            assert abs(cf - nb2) < 1e-10 * max(nb2, 1e-30), (cf, nb2)
            s2T = noise_std**2 / T
            offset = s2T * np.sum(A * A)
            var = 4 * s2T * float((A.T @ b) @ (A.T @ b)) + 2 * s2T**2 * np.sum((A @ A.T) ** 2)
            biases.append(nb2)
            offsets.append(offset)
            variances.append(var)
            inst_rel = (offset + 2 * np.sqrt(var)) / nb2
            worst_inst = max(worst_inst, inst_rel)
        mb = np.mean(biases)
        cell_off = np.mean(offsets) / mb
        cell_std = np.sqrt(np.sum(variances)) / len(seeds) / mb
        cell_rows.append((f, alpha, mb, cell_off, cell_std))

print("worst per-instance (offset + 2 std)/bias:", f"{worst_inst:.3f}")
print("\nper-(f,alpha) cell, 50-seed aggregate:")
print("   f  alpha   mean_bias   rel_offset  rel_std  off+3std")
worst_cell = 0.0
for f, alpha, mb, off, std in cell_rows:
    tot = off + 3 * std
    worst_cell = max(worst_cell, tot)
    print(f"  {f:.1f}  {alpha:4.2f}  {mb:10.4e}  {off:9.2%}  {std:7.2%}  {tot:7.2%}")
print("\nworst cell offset+3std:", f"{worst_cell:.2%}")
