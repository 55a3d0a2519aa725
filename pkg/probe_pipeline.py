"""Scratch probe for end-to-end accuracy orderings (not part of the package)."""
import time

import numpy as np

from urlearn.adapt import TjmParams
from urlearn.features import SyntheticSpec, synthesize_corpus
from urlearn.recognize import PipelineConfig, run_cca_pipeline, run_pipeline
from dataclasses import replace

base_cfg = PipelineConfig(h=3, k_nn=50, d="auto", eta=1.0, max_iter=400, seed=0)

rows = []
t0 = time.time()
for seed in range(5):
    spec = SyntheticSpec(seed=seed)
    data = synthesize_corpus(spec)
    accs = {}
    for name, cfg in {
        "full": replace(base_cfg, seed=seed),
        "eta0": replace(base_cfg, seed=seed, eta=0.0),
        "no_tjm": replace(base_cfg, seed=seed, adapt_enabled=False),
    }.items():
        res = run_pipeline(data.seen, data.unseen, data.semantics, cfg)
        accs[name] = res.report.accuracy
        if name == "full":
            ad = res.adaptation
            accs["mmd"] = (ad.mmd_before, ad.mmd_after)
    cca = run_cca_pipeline(data.seen, data.unseen, data.semantics, replace(base_cfg, seed=seed))
    accs["cca"] = cca.accuracy
    rows.append(accs)
    print(f"seed {seed}: full={accs['full']:.3f} eta0={accs['eta0']:.3f} "
          f"no_tjm={accs['no_tjm']:.3f} cca={accs['cca']:.3f} "
          f"mmd {accs['mmd'][0]:.4f}->{accs['mmd'][1]:.4f}")

mean = lambda k: np.mean([r[k] for r in rows])
print(f"\nmeans: full={mean('full'):.3f} eta0={mean('eta0'):.3f} "
      f"no_tjm={mean('no_tjm'):.3f} cca={mean('cca'):.3f}")
print(f"elapsed {time.time()-t0:.1f}s")
