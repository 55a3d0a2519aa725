"""Third TJM scan: visual-domain drift, transductive matching (scratch)."""
from dataclasses import replace

import numpy as np

from urlearn.adapt import TjmParams, median_bandwidth
from urlearn.features import FeatureBagCorpus, SyntheticSpec, Video, synthesize_corpus
from urlearn.procrustes import project
from urlearn.recognize import PipelineConfig, run_pipeline

def drift_corpus(corpus, drift, seed):
    rng = np.random.default_rng(seed + 7000)
    direction = rng.standard_normal(corpus.d_feat)
    direction /= np.linalg.norm(direction)
    videos = [
        Video(np.clip(v.frames + drift * direction[:, None], 0.0, None), v.label)
        for v in corpus.videos
    ]
    return FeatureBagCorpus(videos, corpus.class_names, corpus.d_feat)

base = PipelineConfig(h=3, k_nn=50, d="auto", eta=1.0, max_iter=400)

def bw_for(data, unseen, cfg, mult):
    res0 = run_pipeline(data.seen, unseen, data.semantics, replace(cfg, adapt_enabled=False))
    cols = np.hstack([project(res0.p_a, res0.a), res0.gallery.prototypes])
    return mult * median_bandwidth(cols)

for drift in (0.0, 0.5, 1.0):
    print(f"=== visual drift {drift} ===")
    for trans in (False, True):
        for lam, mult, dim in [(1.0, 1.0, None), (1.0, 4.0, None), (0.1, 4.0, None),
                               (1.0, 4.0, 16), (0.1, 8.0, None)]:
            accs_f, accs_n, mmds = [], [], []
            for seed in range(5):
                data = synthesize_corpus(SyntheticSpec(seed=seed))
                unseen = data.unseen if drift == 0 else drift_corpus(data.unseen, drift, seed)
                cfg = replace(base, seed=seed, transductive=trans)
                bw = bw_for(data, unseen, cfg, mult) if mult != 1.0 else None
                cfg = replace(cfg, tjm=TjmParams(trade_off=lam, kernel_bandwidth=bw, out_dim=dim))
                full = run_pipeline(data.seen, unseen, data.semantics, cfg)
                none = run_pipeline(data.seen, unseen, data.semantics,
                                    replace(cfg, adapt_enabled=False))
                accs_f.append(full.report.accuracy)
                accs_n.append(none.report.accuracy)
                ad = full.adaptation
                mmds.append(ad.mmd_after <= ad.mmd_before)
            print(f"  trans={trans} lam={lam} bw_mult={mult} dim={dim}: "
                  f"full={np.mean(accs_f):.3f} none={np.mean(accs_n):.3f} mmd_ok={all(mmds)}")
