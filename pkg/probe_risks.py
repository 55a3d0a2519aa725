"""Scratch probe for the empirically risky properties (not part of the package)."""
import time

import numpy as np

from urlearn import url
from urlearn.features import synthesize_planted

rng = np.random.default_rng(12345)

# --- 1. monotonicity stress ---------------------------------------------------
print("== monotonicity stress ==")
worst = 0.0
t0 = time.time()
for trial in range(20):
    m1 = int(rng.integers(10, 41))
    m2 = int(rng.integers(5, 21))
    n = int(rng.integers(20, 61))
    d = int(rng.integers(3, min(9, m2, m1, n)))
    eta = [0.0, 0.1, 1.0, 10.0][trial % 4]
    a = rng.uniform(size=(m1, n))
    b = rng.uniform(size=(m2, n))
    model = url.fit(a, b, d, eta, url.FitConfig(max_iter=150, tol=0.0, seed=trial))
    totals = np.array([t.total for t in model.loss_trace])
    inc = np.max(np.diff(totals))
    worst = max(worst, inc)
    if inc > 1e-9:
        print(f"  VIOLATION trial={trial} eta={eta} inc={inc:.3e}")
print(f"  worst increase over 20 runs: {worst:.3e}  ({time.time()-t0:.1f}s)")

# --- 2. gradient fd check -----------------------------------------------------
print("== jsd gradient vs finite differences ==")
for trial in range(5):
    d, n = 3, 6
    v = rng.uniform(0.1, 1.0, size=(d, n))
    a = rng.uniform(size=(8, n))
    b = rng.uniform(size=(5, n))
    p_a = url.pairwise_affinities(a)
    p_b = url.pairwise_affinities(b)
    eta = 0.7
    g = url.jsd_gradient(v, p_a, p_b, eta)
    h = 1e-5
    num = np.zeros_like(v)
    for i in range(d):
        for j in range(n):
            vp = v.copy(); vp[i, j] += h
            vm = v.copy(); vm[i, j] -= h
            fp = eta * url.jsd_penalty(p_a, p_b, url.q_matrix(vp))
            fm = eta * url.jsd_penalty(p_a, p_b, url.q_matrix(vm))
            num[i, j] = (fp - fm) / (2 * h)
    rel = np.linalg.norm(g - num) / max(np.linalg.norm(num), 1e-30)
    print(f"  trial {trial}: rel err {rel:.3e}")

# --- 3. planted recovery ------------------------------------------------------
print("== planted recovery ==")
ok = 0
for seed in range(5):
    planted = synthesize_planted(30, 12, 40, 4, seed=seed)
    model = url.fit(planted.a, planted.b, 4, 0.0, url.FitConfig(max_iter=1000, tol=0.0, seed=seed + 100))
    rel_a = np.linalg.norm(planted.a - model.u @ model.v) / np.linalg.norm(planted.a)
    rel_b = np.linalg.norm(planted.b - model.w @ model.v) / np.linalg.norm(planted.b)
    good = rel_a <= 5e-2 and rel_b <= 5e-2
    ok += good
    print(f"  seed {seed}: rel_a={rel_a:.4f} rel_b={rel_b:.4f} {'ok' if good else 'FAIL'}")
print(f"  {ok}/5 seeds ok")

# --- 4. eta=10 vs eta=0 jsd comparison ----------------------------------------
print("== jsd shrinks with eta ==")
a = rng.uniform(size=(12, 30)); b = rng.uniform(size=(8, 30))
m0 = url.fit(a, b, 4, 0.0, url.FitConfig(max_iter=300, seed=7))
m10 = url.fit(a, b, 4, 10.0, url.FitConfig(max_iter=300, seed=7))
print(f"  jsd(eta=0)={m0.loss_trace[-1].jsd:.5f}  jsd(eta=10)={m10.loss_trace[-1].jsd:.5f}")
