"""Scan TJM knobs on unshifted and semantically drifted suites (scratch)."""
from dataclasses import replace

import numpy as np

from urlearn.adapt import TjmParams
from urlearn.features import SemanticTable, SyntheticSpec, synthesize_corpus
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

for drift in (0.0, 0.4):
    print(f"=== drift {drift} ===")
    for lam, bw_mult, dim in [(1.0, None, None), (0.1, None, None), (0.01, None, None),
                              (0.1, 2.0, None), (0.1, None, 4), (0.01, None, 4),
                              (1.0, None, 4), (0.1, 2.0, 4)]:
        accs_full, accs_none, mmd_ok = [], [], True
        for seed in range(5):
            data = synthesize_corpus(SyntheticSpec(seed=seed))
            sem = data.semantics if drift == 0 else drift_semantics(
                data.semantics, data.unseen.class_names, drift, seed)
            tjm = TjmParams(trade_off=lam, out_dim=dim)
            cfg = replace(base, seed=seed, tjm=tjm)
            if bw_mult is not None:
                # bandwidth multiplier probed via explicit bandwidth after a dry run
                from urlearn.adapt import median_bandwidth
                res0 = run_pipeline(data.seen, data.unseen, sem,
                                    replace(cfg, adapt_enabled=False))
                from urlearn.procrustes import project
                cols = np.hstack([project(res0.p_a, res0.a), res0.gallery.prototypes])
                tjm = TjmParams(trade_off=lam, out_dim=dim,
                                kernel_bandwidth=bw_mult * median_bandwidth(cols))
                cfg = replace(cfg, tjm=tjm)
            full = run_pipeline(data.seen, data.unseen, sem, cfg)
            none = run_pipeline(data.seen, data.unseen, sem,
                                replace(cfg, adapt_enabled=False))
            accs_full.append(full.report.accuracy)
            accs_none.append(none.report.accuracy)
            ad = full.adaptation
            if ad.mmd_after > ad.mmd_before:
                mmd_ok = False
        print(f"  lam={lam} bw_mult={bw_mult} dim={dim}: "
              f"full={np.mean(accs_full):.3f} none={np.mean(accs_none):.3f} "
              f"mmd_monotone={mmd_ok}")
