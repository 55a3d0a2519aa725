"""Second TJM scan: transductive mode and bandwidth scaling (scratch)."""
from dataclasses import replace

import numpy as np

from urlearn.adapt import TjmParams, median_bandwidth
from urlearn.features import SemanticTable, SyntheticSpec, synthesize_corpus
from urlearn.procrustes import project
from urlearn.recognize import PipelineConfig, run_pipeline

def drift_semantics(table, unseen_names, drift, seed):
    rng = np.random.default_rng(seed + 9000)
    delta = drift * rng.standard_normal(table.dim)
    cols = table.embeddings.copy()
    for name in unseen_names:
        i = table.class_names.index(name)
        col = np.clip(cols[:, i] + delta, 0.0, None)
        cols[:, i] = col / np.linalg.norm(col)
    return SemanticTable(cols, table.class_names)

base = PipelineConfig(h=3, k_nn=50, d="auto", eta=1.0, max_iter=400)

def bw_for(data, sem, cfg, mult):
    res0 = run_pipeline(data.seen, data.unseen, sem, replace(cfg, adapt_enabled=False))
    cols = np.hstack([project(res0.p_a, res0.a), res0.gallery.prototypes])
    return mult * median_bandwidth(cols)

for drift in (0.0, 0.8):
    print(f"=== drift {drift} ===")
    for trans in (False, True):
        for lam, mult in [(0.1, 1.0), (0.1, 4.0), (1.0, 4.0), (0.01, 8.0), (0.1, 8.0)]:
            accs_f, accs_n, mmds = [], [], []
            for seed in range(5):
                data = synthesize_corpus(SyntheticSpec(seed=seed))
                sem = data.semantics if drift == 0 else drift_semantics(
                    data.semantics, data.unseen.class_names, drift, seed)
                cfg = replace(base, seed=seed, transductive=trans)
                bw = bw_for(data, sem, cfg, mult)
                cfg = replace(cfg, tjm=TjmParams(trade_off=lam, kernel_bandwidth=bw))
                full = run_pipeline(data.seen, data.unseen, sem, cfg)
                none = run_pipeline(data.seen, data.unseen, sem,
                                    replace(cfg, adapt_enabled=False))
                accs_f.append(full.report.accuracy)
                accs_n.append(none.report.accuracy)
                ad = full.adaptation
                mmds.append(ad.mmd_after <= ad.mmd_before)
            print(f"  trans={trans} lam={lam} bw_mult={mult}: "
                  f"full={np.mean(accs_f):.3f} none={np.mean(accs_n):.3f} "
                  f"mmd_ok={all(mmds)}")
