"""Fourth scan: semantic-map drift (cross-corpus label embeddings) (scratch)."""
from dataclasses import replace

import numpy as np

from urlearn.adapt import TjmParams, median_bandwidth
from urlearn.features import SemanticTable, SyntheticSpec, synthesize_corpus
from urlearn.procrustes import project
from urlearn.recognize import PipelineConfig, run_pipeline

def drifted_semantics(data, drift, seed):
    """Unseen columns re-generated through a perturbed semantic map."""
    truth = data.truth
    rng = np.random.default_rng(seed + 5000)
    t_drift = np.abs(truth.semantic_map + drift * rng.standard_normal(truth.semantic_map.shape))
    cols = data.semantics.embeddings.copy()
    n_seen = truth.combo_weights.shape[1]
    for u in range(truth.combo_weights.shape[0]):
        raw = t_drift @ truth.combo_weights[u]
        col = np.clip(raw, 0.0, None)
        cols[:, n_seen + u] = col / np.linalg.norm(col)
    return SemanticTable(cols, data.semantics.class_names)

base = PipelineConfig(h=3, k_nn=50, d="auto", eta=1.0, max_iter=400)

def bw_for(data, sem, cfg, mult):
    res0 = run_pipeline(data.seen, data.unseen, sem, replace(cfg, adapt_enabled=False))
    cols = np.hstack([project(res0.p_a, res0.a), res0.gallery.prototypes])
    return mult * median_bandwidth(cols)

for drift in (0.5, 1.0, 2.0):
    print(f"=== semantic-map drift {drift} ===")
    for lam, mult in [(1.0, 1.0), (1.0, 4.0), (0.1, 4.0), (0.1, 8.0), (0.01, 8.0)]:
        accs_f, accs_n, mmds = [], [], []
        for seed in range(5):
            data = synthesize_corpus(SyntheticSpec(seed=seed))
            sem = drifted_semantics(data, drift, seed)
            cfg = replace(base, seed=seed)
            bw = bw_for(data, sem, cfg, mult) if mult != 1.0 else None
            cfg = replace(cfg, tjm=TjmParams(trade_off=lam, kernel_bandwidth=bw))
            full = run_pipeline(data.seen, data.unseen, sem, cfg)
            none = run_pipeline(data.seen, data.unseen, sem, replace(cfg, adapt_enabled=False))
            accs_f.append(full.report.accuracy)
            accs_n.append(none.report.accuracy)
            ad = full.adaptation
            mmds.append(ad.mmd_after <= ad.mmd_before)
        print(f"  lam={lam} bw_mult={mult}: full={np.mean(accs_f):.3f} "
              f"none={np.mean(accs_n):.3f} mmd_ok={all(mmds)}")
