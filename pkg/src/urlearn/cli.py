"""Command-line front end.

    urlearn <command> [--config FILE] [--set key=value ...] [--seed N] [--out DIR]

Commands: synth, encode, fit, gallery, adapt, predict, eval, cv.
Config files are flat key=value text; --set overrides win. Exit codes:
0 ok, 2 config error, 3 data error, 4 numeric degeneracy.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import bundles, gmil, url
from .adapt import TjmParams, tjm_adapt
from .errors import ConfigError, UrlearnError
from .features import (
    SemanticTable,
    SyntheticSpec,
    load_corpus,
    load_word_vectors,
    save_corpus,
    synthesize_corpus,
)
from .procrustes import Projection, project, solve_rotation
from .recognize import (
    PipelineConfig,
    PrototypeGallery,
    build_gallery,
    cross_validate,
    evaluate,
    make_hops,
    predict,
    resolve_d,
)


@dataclass
class RunConfig:
    """Resolved configuration for one command invocation."""

    # paths
    out: str = "."
    corpus: str = ""
    semantics: str = ""
    classes: str = ""
    bags: str = ""
    matrix: str = ""
    model: str = ""
    gallery: str = ""
    adaptation: str = ""
    predictions: str = ""
    report: str = ""
    # hyperparameters
    h: int = 5
    k_nn: int = 200
    d: str = "low"               # "low", "high", "auto", or an integer
    eta: float = 1.0
    tjm_lambda: float = 1.0
    tjm_dim: int = 0             # 0: automatic
    tjm_iters: int = 10
    adapt: str = "on"
    transductive: str = "off"
    seed: int = 0
    tol: float = 1e-6
    max_iter: int = 1000
    # synth parameters
    synth_c_seen: int = 8
    synth_c_unseen: int = 4
    synth_h_true: int = 2
    synth_d_feat: int = 20
    synth_l_sem: int = 16
    synth_frames_min: int = 8
    synth_frames_max: int = 16
    synth_videos_per_class: int = 10
    synth_noise: float = 0.05
    # cross-validation
    hops: int = 5
    eta_grid: str = "0.01,0.1,1,10"
    lambda_grid: str = "0.1,1,10"

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def provenance(self) -> dict:
        return {"config": self.to_dict(), "config_hash": self.hash()}


def _parse_value(key: str, raw: str, kind):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {kind.__name__}")


def load_config(path: str | None, overrides: list[str]) -> RunConfig:
    cfg = RunConfig()
    kinds = {f.name: f.type for f in fields(cfg)}
    types = {"int": int, "float": float, "str": str}

    def assign(key, raw, where):
        if key not in kinds:
            raise ConfigError(f"{where}: unknown config key {key!r}")
        kind = types.get(kinds[key], str)
        setattr(cfg, key, _parse_value(key, raw.strip(), kind))

    if path:
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        for lineno, line in enumerate(lines, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected key=value")
            key, raw = line.split("=", 1)
            assign(key.strip(), raw, f"{path}: line {lineno}")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected key=value")
        key, raw = item.split("=", 1)
        assign(key.strip(), raw, "--set")
    return cfg


def _flag(cfg: RunConfig, name: str) -> bool:
    value = getattr(cfg, name).lower()
    if value in ("on", "true", "1", "yes"):
        return True
    if value in ("off", "false", "0", "no"):
        return False
    raise ConfigError(f"config key {name!r}: expected on/off, got {value!r}")


def _d_mode(cfg: RunConfig):
    if cfg.d in ("low", "high", "auto"):
        return cfg.d
    try:
        return int(cfg.d)
    except ValueError:
        raise ConfigError(f"config key 'd': expected low/high/auto or integer, got {cfg.d!r}")


def _tjm_params(cfg: RunConfig) -> TjmParams:
    return TjmParams(
        trade_off=cfg.tjm_lambda,
        out_dim=cfg.tjm_dim or None,
        iterations=cfg.tjm_iters,
    )


def _require(cfg: RunConfig, *keys: str) -> None:
    for key in keys:
        if not getattr(cfg, key):
            raise ConfigError(f"command requires config key {key!r}")
        if not Path(getattr(cfg, key)).exists():
            raise ConfigError(f"config key {key!r}: path {getattr(cfg, key)!r} not found")


def _out_path(cfg: RunConfig, key: str, default: str) -> Path:
    value = getattr(cfg, key)
    if value:
        return Path(value)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out / default


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _load_semantics(cfg: RunConfig, names: list[str]) -> SemanticTable:
    return load_word_vectors(cfg.semantics, names)


def _read_classes(cfg: RunConfig) -> dict:
    _require(cfg, "classes")
    try:
        return json.loads(Path(cfg.classes).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"classes file {cfg.classes}: invalid JSON: {exc}") from exc


# ---------------------------------------------------------------------------
# commands


def cmd_synth(cfg: RunConfig) -> str:
    try:
        spec = SyntheticSpec(
            c_seen=cfg.synth_c_seen,
            c_unseen=cfg.synth_c_unseen,
            h_true=cfg.synth_h_true,
            d_feat=cfg.synth_d_feat,
            l_sem=cfg.synth_l_sem,
            frames_per_video=(cfg.synth_frames_min, cfg.synth_frames_max),
            videos_per_class=cfg.synth_videos_per_class,
            noise=cfg.synth_noise,
            seed=cfg.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = synthesize_corpus(spec)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(result.seen, out / "seen.urlc")
    save_corpus(result.unseen, out / "unseen.urlc")
    for stem in ("seen", "unseen"):
        _write_json(out / f"{stem}.urlc.meta.json", cfg.provenance())
    with open(out / "semantics.txt", "w", encoding="utf-8") as fh:
        table = result.semantics
        for i, name in enumerate(table.class_names):
            vec = " ".join(f"{x:.17g}" for x in table.embeddings[:, i])
            fh.write(f"{name} {vec}\n")
    _write_json(
        out / "classes.json",
        {
            "seen": result.seen.class_names,
            "unseen": result.unseen.class_names,
            **cfg.provenance(),
        },
    )
    truth = result.truth
    _write_json(
        out / "truth.json",
        {
            "combo_weights": truth.combo_weights.tolist(),
            "seen_centroids": truth.seen_centroids.tolist(),
            "unseen_centroids": truth.unseen_centroids.tolist(),
            "semantic_map": truth.semantic_map.tolist(),
            **cfg.provenance(),
        },
    )
    return (
        f"synth: {result.seen.n_videos} seen / {result.unseen.n_videos} unseen videos, "
        f"{spec.c_seen}+{spec.c_unseen} classes -> {out}"
    )


def cmd_encode(cfg: RunConfig) -> str:
    _require(cfg, "corpus")
    corpus = load_corpus(cfg.corpus, "binary")
    bags = gmil.build_bags(corpus, cfg.h, cfg.k_nn, cfg.seed)
    a = gmil.embed_corpus(bags, corpus)
    bags_path = _out_path(cfg, "bags", "bags.urlm")
    gmil.save_bag_model(bags, bags_path, config=cfg.provenance())
    matrix_path = _out_path(cfg, "matrix", "embed.urlm")
    bundles.write_bundle(
        matrix_path,
        {"a": a},
        {
            "kind": "embedding",
            "labels": corpus.labels(),
            "class_names": corpus.class_names,
            **cfg.provenance(),
        },
    )
    return (
        f"encode: {a.shape[1]} videos -> {a.shape[0]}-dim embeddings "
        f"({bags_path}, {matrix_path})"
    )


def cmd_fit(cfg: RunConfig) -> str:
    _require(cfg, "matrix", "semantics")
    matrices, meta = bundles.read_bundle(cfg.matrix)
    a = matrices["a"]
    labels = [int(x) for x in meta["labels"]]
    class_names = list(meta["class_names"])
    table = _load_semantics(cfg, class_names)
    b = table.embeddings[:, [l - 1 for l in labels]]
    d = resolve_d(_d_mode(cfg), a.shape[0], b.shape[0], a.shape[1], len(class_names))
    model = url.fit(a, b, d, cfg.eta, url.FitConfig(cfg.max_iter, cfg.tol, cfg.seed))
    p_a = solve_rotation(a, model.v)
    p_b = solve_rotation(b, model.v)
    model_path = _out_path(cfg, "model", "model.urlm")
    url.save_model(
        model,
        model_path,
        projections={"p_a": p_a.matrix, "p_b": p_b.matrix},
        config={**cfg.provenance(), "d": d, "class_names": class_names},
    )
    trace_path = model_path.with_suffix(".loss.csv")
    url.trace_to_csv(model, trace_path)
    final = model.loss_trace[-1]
    return (
        f"fit: d={d} eta={cfg.eta} iterations={model.iterations} "
        f"converged={model.converged} total={final.total:.6g} ({model_path})"
    )


def _load_model(cfg: RunConfig):
    _require(cfg, "model")
    model, projections = url.load_model(cfg.model)
    _, meta = bundles.read_bundle(cfg.model)
    return model, projections, meta.get("config", {})


def cmd_gallery(cfg: RunConfig) -> str:
    _require(cfg, "model", "semantics")
    model, projections, model_cfg = _load_model(cfg)
    class_info = _read_classes(cfg)
    seen_names = model_cfg.get("class_names", class_info.get("seen", []))
    unseen_names = class_info["unseen"]
    table = _load_semantics(cfg, unseen_names)
    p_b = Projection(projections["p_b"])
    n_seen = len(seen_names)
    labels = [n_seen + i for i in range(1, len(unseen_names) + 1)]
    gallery = build_gallery(p_b, table, labels, seen_labels=range(1, n_seen + 1))
    gallery_path = _out_path(cfg, "gallery", "gallery.urlm")
    bundles.write_bundle(
        gallery_path,
        {"prototypes": gallery.prototypes, "labels": np.array(gallery.labels, float)},
        {
            "kind": "gallery",
            "adapted": False,
            "class_names": unseen_names,
            **cfg.provenance(),
        },
    )
    return f"gallery: {len(labels)} prototypes in {gallery.prototypes.shape[0]} dims ({gallery_path})"


def _load_gallery(path) -> tuple[PrototypeGallery, dict]:
    matrices, meta = bundles.read_bundle(path)
    gallery = PrototypeGallery(
        matrices["prototypes"],
        [int(x) for x in matrices["labels"].ravel()],
        adapted=bool(meta.get("adapted", False)),
    )
    return gallery, meta


def cmd_adapt(cfg: RunConfig) -> str:
    _require(cfg, "model", "matrix", "gallery")
    model, projections, model_cfg = _load_model(cfg)
    matrices, _ = bundles.read_bundle(cfg.matrix)
    gallery, gal_meta = _load_gallery(cfg.gallery)
    p_a = Projection(projections["p_a"])
    a_scale = float(model_cfg.get("a_scale", 1.0))
    v_a = project(p_a, a_scale * matrices["a"])
    extra = None
    if _flag(cfg, "transductive"):
        _require(cfg, "bags", "corpus")
        bag_model = gmil.load_bag_model(cfg.bags)
        test = load_corpus(cfg.corpus, "binary")
        extra = p_a.matrix @ (a_scale * gmil.embed_corpus(bag_model, test))
    result = tjm_adapt(v_a, gallery.prototypes, _tjm_params(cfg), extra_target=extra)
    anchored = anchor_prototypes(result, v_a)
    adaptation_path = _out_path(cfg, "adaptation", "adaptation.urlm")
    bundles.write_bundle(
        adaptation_path,
        {
            "transform": result.transform,
            "kernel": result.kernel,
            "adapted_source": result.adapted_source,
            "adapted_prototypes": result.adapted_prototypes,
            "train_columns": result.train_columns,
        },
        {
            "kind": "adaptation",
            "bandwidth": result.bandwidth,
            "mmd_before": result.mmd_before,
            "mmd_after": result.mmd_after,
            **cfg.provenance(),
        },
    )
    adapted_path = _out_path(cfg, "gallery", "gallery.urlm").with_name(
        "gallery_adapted.urlm"
    )
    bundles.write_bundle(
        adapted_path,
        {"prototypes": anchored, "labels": np.array(gallery.labels, float)},
        {
            "kind": "gallery",
            "adapted": True,
            "class_names": gal_meta.get("class_names", []),
            **cfg.provenance(),
        },
    )
    return (
        f"adapt: mmd {result.mmd_before:.6g} -> {result.mmd_after:.6g} "
        f"({adaptation_path}, {adapted_path})"
    )


def cmd_predict(cfg: RunConfig) -> str:
    _require(cfg, "model", "bags", "gallery", "corpus")
    model, projections, model_cfg = _load_model(cfg)
    bag_model = gmil.load_bag_model(cfg.bags)
    gallery, _ = _load_gallery(cfg.gallery)
    test = load_corpus(cfg.corpus, "binary")
    p_a = Projection(projections["p_a"])
    a_scale = float(model_cfg.get("a_scale", 1.0))
    predictions = []
    for v in test.videos:
        emb = gmil.embed_video(bag_model, v.frames)
        scaled = gmil.EmbeddingVector(a_scale * emb.values, emb.source_length)
        predictions.append(predict(p_a, scaled, gallery))
    predictions_path = _out_path(cfg, "predictions", "predictions.json")
    _write_json(
        predictions_path,
        {"predictions": predictions, "n_videos": len(predictions), **cfg.provenance()},
    )
    return f"predict: {len(predictions)} videos ({predictions_path})"


def cmd_eval(cfg: RunConfig) -> str:
    _require(cfg, "predictions", "corpus")
    payload = json.loads(Path(cfg.predictions).read_text(encoding="utf-8"))
    predictions = [int(x) for x in payload["predictions"]]
    test = load_corpus(cfg.corpus, "binary")
    class_info = _read_classes(cfg)
    n_seen = len(class_info["seen"])
    truth = [n_seen + v.label for v in test.videos]
    report = evaluate(predictions, truth, split="cli", seed=cfg.seed)
    report_path = _out_path(cfg, "report", "report.json")
    _write_json(report_path, {**report.to_dict(), **cfg.provenance()})
    return f"eval: accuracy {report.accuracy:.4f} over {len(truth)} videos ({report_path})"


def cmd_cv(cfg: RunConfig) -> str:
    _require(cfg, "corpus", "semantics")
    corpus = load_corpus(cfg.corpus, "binary")
    table = _load_semantics(cfg, corpus.class_names)
    hops = make_hops(table, cfg.hops, cfg.seed)
    try:
        eta_grid = [float(x) for x in cfg.eta_grid.split(",") if x.strip()]
        lambda_grid = [float(x) for x in cfg.lambda_grid.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse hyperparameter grids: {exc}") from exc
    pipeline_cfg = PipelineConfig(
        h=cfg.h,
        k_nn=cfg.k_nn,
        d=_d_mode(cfg),
        tjm=_tjm_params(cfg),
        adapt_enabled=_flag(cfg, "adapt"),
        transductive=_flag(cfg, "transductive"),
        max_iter=cfg.max_iter,
        tol=cfg.tol,
        seed=cfg.seed,
    )
    best_eta, best_tjm, reports = cross_validate(
        corpus, table, hops, eta_grid, lambda_grid, pipeline_cfg
    )
    report_path = _out_path(cfg, "report", "cv_report.json")
    _write_json(
        report_path,
        {
            "best_eta": best_eta,
            "best_tjm_lambda": best_tjm.trade_off,
            "hops": hops,
            "fold_reports": [r.to_dict() for r in reports],
            **cfg.provenance(),
        },
    )
    return f"cv: best eta={best_eta} lambda={best_tjm.trade_off} ({report_path})"


COMMANDS = {
    "synth": cmd_synth,
    "encode": cmd_encode,
    "fit": cmd_fit,
    "gallery": cmd_gallery,
    "adapt": cmd_adapt,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "cv": cmd_cv,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="urlearn", description="Universal-representation recognition pipeline"
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", default=None, help="flat key=value config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key",
    )
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        print(COMMANDS[args.command](cfg))
        return 0
    except UrlearnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
