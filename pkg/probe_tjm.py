"""Diagnose the TJM collapse (scratch, not part of the package)."""
from dataclasses import replace

import numpy as np

from urlearn import gmil
from urlearn.adapt import TjmParams, mmd, tjm_adapt
from urlearn.features import SyntheticSpec, synthesize_corpus
from urlearn.procrustes import project, solve_rotation
from urlearn.recognize import PipelineConfig, run_pipeline, semantic_columns_for
from urlearn import url

cfg = PipelineConfig(h=3, k_nn=50, d="auto", eta=1.0, max_iter=400, seed=0)
data = synthesize_corpus(SyntheticSpec(seed=0))
res = run_pipeline(data.seen, data.unseen, data.semantics, replace(cfg, adapt_enabled=False))

p_a, p_b, model, bags, a = res.p_a, res.p_b, res.model, res.bags, res.a
v_a = project(p_a, a)
protos = res.gallery.prototypes  # unadapted gallery
test_emb = np.column_stack([gmil.embed_video(bags, v.frames).values for v in data.unseen.videos])
queries = p_a.matrix @ test_emb

print("v_a col norm mean", np.linalg.norm(v_a, axis=0).mean())
print("proto col norms", np.linalg.norm(protos, axis=0))
print("query col norm mean", np.linalg.norm(queries, axis=0).mean())

for lam in [1.0, 0.1, 0.0]:
    ad = tjm_adapt(v_a, protos, TjmParams(trade_off=lam))
    zq = ad.embed(queries)
    zs, zp = ad.adapted_source, ad.adapted_prototypes
    print(f"\nlam={lam}: mmd {ad.mmd_before:.4f}->{ad.mmd_after:.4f}")
    print("  adapted proto pairwise dists:",
          np.round([np.linalg.norm(zp[:, i] - zp[:, j]) for i in range(4) for j in range(i+1, 4)], 4))
    print("  adapted query spread (std of cols):", np.round(zq.std(axis=1).mean(), 5))
    print("  query col norm mean:", np.round(np.linalg.norm(zq, axis=0).mean(), 4),
          " proto col norm mean:", np.round(np.linalg.norm(zp, axis=0).mean(), 4))
    # prediction histogram
    preds = []
    for j in range(zq.shape[1]):
        d2 = np.sum((zp - zq[:, j:j+1])**2, axis=0)
        preds.append(int(np.argmin(d2)))
    hist = np.bincount(preds, minlength=4)
    truth = np.array([v.label - 1 for v in data.unseen.videos])
    acc = np.mean(np.array(preds) == truth)
    print("  pred histogram:", hist, " acc:", acc)
    print("  transform source-row norm mean:", np.linalg.norm(ad.transform[:80], axis=1).mean(),
          " proto-row norm mean:", np.linalg.norm(ad.transform[80:], axis=1).mean())
