"""File-based pipeline stages.

Every stage reads its inputs from disk and writes its outputs next to a
``<file>.meta`` sidecar (``key=value`` lines) recording the seed and the
hyperparameters that produced it. A stage refuses inputs whose recorded
seed differs from its own. :func:`run_e2e` only chains these functions, so a
manual sequence of stage commands with the same settings produces the same
bytes.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import os
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import classifiers as clf
from . import evaluation as ev
from . import fusion, mimic, synth
from .context import GroupCorpus, generate_groups
from .dataset import read_dataset, write_dataset
from .errors import ArtifactMismatchError, ColdNodeError, FileFormatError
from .graph import complement_negative_sample, load_graph
from .skipgram import EmbeddingSet, TrainConfig, read_embeddings, train, write_embeddings

logger = logging.getLogger(__name__)

TASKS = ("buying", "credit", "credit-friends-only")

# stage salts mixed into the global seed
_SALT_NEGATIVES = 101


@dataclass
class EmbedSettings:
    k: int = 5
    n: int = 5
    dimension: int = 32
    epochs: int = 5
    initial_learning_rate: float = 0.025
    negative_samples: int = 5


@dataclass
class MimicSettings:
    n: int = 10
    lr: float = 1e-3
    epochs: int = 300
    batch_size: int = 32
    val_fraction: float = 0.1
    residual: bool = True


@dataclass
class ClassifySettings:
    kind: str = ""  # empty: mlp for buying, logreg for credit
    train_fraction: float = 0.8
    threshold: float = 0.5
    C: float = 1.0
    k: int = 3
    hidden: int = 100
    lr: float = 1e-3
    max_iter: int = 200
    standardize: bool = True
    rfe: bool = False


@dataclass
class EvalSettings:
    sweep: str = "0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9"
    curve: str = "0.1,0.25,0.5,0.75,1.0"
    folds: int = 5


@dataclass
class PipelineConfig:
    seed: int = 0
    workers: int = 1
    synth: synth.SynthConfig = field(default_factory=synth.SynthConfig)
    embed: EmbedSettings = field(default_factory=EmbedSettings)
    mimic: MimicSettings = field(default_factory=MimicSettings)
    classify: ClassifySettings = field(default_factory=ClassifySettings)
    eval: EvalSettings = field(default_factory=EvalSettings)

    def items(self):
        """Flat ``(key, value)`` pairs, e.g. ``("embed.dimension", 32)``."""
        out = [("seed", self.seed), ("workers", self.workers)]
        for sec in ("synth", "embed", "mimic", "classify", "eval"):
            obj = getattr(self, sec)
            for f in dataclasses.fields(obj):
                if sec == "synth" and f.name == "seed":
                    continue
                v = getattr(obj, f.name)
                if isinstance(v, tuple):
                    v = ",".join(repr(x) for x in v)
                out.append((f"{sec}.{f.name}", "" if v is None else v))
        return out

    def synth_config(self):
        return dataclasses.replace(self.synth, seed=self.seed)


def _convert(text, current, name):
    text = text.strip()
    if isinstance(current, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {text!r}")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    if current is None or isinstance(current, tuple):
        return tuple(float(x) for x in text.split(",")) if text else None
    return text


def apply_setting(cfg, key, value):
    """Set ``section.name`` (or ``seed``/``workers``) from its text form."""
    parts = key.strip().split(".")
    if len(parts) == 1 and parts[0] in ("seed", "workers"):
        setattr(cfg, parts[0], int(value))
        return
    if len(parts) != 2 or not hasattr(cfg, parts[0]) or parts[0] in ("seed", "workers"):
        raise ValueError(f"unknown config key {key!r}")
    obj = getattr(cfg, parts[0])
    if not hasattr(obj, parts[1]) or (parts[0] == "synth" and parts[1] == "seed"):
        raise ValueError(f"unknown config key {key!r}")
    setattr(obj, parts[1], _convert(value, getattr(obj, parts[1]), key))


def parse_settings(lines, cfg=None):
    """Apply ``key=value`` lines (``#`` comments allowed) to ``cfg``."""
    cfg = cfg or PipelineConfig()
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {raw.strip()!r} is not key=value")
        key, value = line.split("=", 1)
        apply_setting(cfg, key, value)
    # re-run dataclass validation
    cfg.synth = dataclasses.replace(cfg.synth)
    return cfg


def load_config(path=None, overrides=()):
    cfg = PipelineConfig()
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read().splitlines()
        except OSError as exc:
            raise FileFormatError(path, "a key=value config file", str(exc)) from None
        parse_settings(text, cfg)
    return parse_settings(overrides, cfg)


def write_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in cfg.items():
            fh.write(f"{k}={v}\n")


# -- artifact metadata -----------------------------------------------------

def meta_path(path):
    return f"{path}.meta"


def write_meta(path, **items):
    with open(meta_path(path), "w", encoding="utf-8") as fh:
        for k, v in items.items():
            fh.write(f"{k}={v}\n")


def read_meta(path):
    """Recorded metadata of an artifact, or ``{}`` if it has none.

    Graph and label files emitted by the generator inherit the directory's
    ``synth.manifest``.
    """
    cand = meta_path(path)
    if not os.path.exists(cand):
        cand = os.path.join(os.path.dirname(path) or ".", "synth.manifest")
        if not (path.endswith((".edges", ".labels")) and os.path.exists(cand)):
            return {}
    out = {}
    with open(cand, encoding="utf-8") as fh:
        for line in fh:
            if "=" in line:
                k, v = line.rstrip("\n").split("=", 1)
                out[k] = v
    return out


def check_seed(seed, *paths):
    """Refuse inputs produced under a different seed."""
    for p in paths:
        rec = read_meta(p).get("seed")
        if rec is not None and int(rec) != int(seed):
            raise ArtifactMismatchError(
                f"{p} was produced with seed={rec} but this run uses seed={seed}; "
                f"rerun the upstream stage with --seed {seed} or pass --seed {rec}")


def _require(path, what):
    if not os.path.exists(path):
        raise FileFormatError(path, what, "file not found")


# -- stages ----------------------------------------------------------------

def cmd_synth(cfg, outdir):
    """Generate the benchmark graphs and labels into ``outdir``."""
    data = synth.generate(cfg.synth_config())
    synth.write_synth(data, outdir)
    logger.info("synth: %s", synth.summary(data))
    return data


def cmd_train_embed(cfg, graph_path, out_path, name=None):
    """Context groups + SkipGram on one graph; writes an embedding file."""
    _require(graph_path, "an edge list")
    check_seed(cfg.seed, graph_path)
    g = load_graph(graph_path, name=name)
    es = cfg.embed
    corpus = generate_groups(g, es.k, es.n, seed=cfg.seed, workers=cfg.workers)
    corpus = GroupCorpus(corpus.roots, corpus.offsets, corpus.members, corpus.k, corpus.n,
                         corpus.num_nodes, g.name)
    tc = TrainConfig(es.dimension, es.epochs, es.initial_learning_rate, es.negative_samples,
                     seed=cfg.seed, workers=cfg.workers)
    e = train(corpus, tc, labels=g.labels)
    write_embeddings(e, out_path)
    write_meta(out_path, stage="train-embed", seed=cfg.seed, graph=g.name,
               groups=len(corpus), **{f"embed.{k}": v for k, v in dataclasses.asdict(es).items()})
    return e


def _mimic_config(cfg):
    ms = cfg.mimic
    return mimic.MimicConfig(n=ms.n, lr=ms.lr, epochs=ms.epochs, batch_size=ms.batch_size,
                             seed=cfg.seed, val_fraction=ms.val_fraction, residual=ms.residual)


def cmd_mimic_train(cfg, graph_path, emb_path, out_path):
    """Fit the neighbor regressor for embedding ``emb_path`` over graph ``graph_path``."""
    for p, what in ((graph_path, "an edge list"), (emb_path, "an embedding file")):
        _require(p, what)
    check_seed(cfg.seed, graph_path, emb_path)
    g = load_graph(graph_path)
    e = read_embeddings(emb_path)
    model = mimic.mimic_train(g, e, _mimic_config(cfg))
    mimic.save_mimic(model, out_path)
    write_meta(out_path, stage="mimic-train", seed=cfg.seed, train_mse=repr(model.train_mse),
               val_mse=repr(model.val_mse),
               **{f"mimic.{k}": v for k, v in dataclasses.asdict(cfg.mimic).items()})
    return model


def cmd_mimic_infer(cfg, model_path, graph_path, emb_path, out_path, nodes=None):
    """Infer vectors for graph nodes missing from the embedding.

    Writes an embedding file holding only the inferred nodes; nodes without
    any embedded neighbor are skipped.
    """
    for p, what in ((model_path, "a mimic model file"), (graph_path, "an edge list"),
                    (emb_path, "an embedding file")):
        _require(p, what)
    check_seed(cfg.seed, model_path, graph_path, emb_path)
    model = mimic.load_mimic(model_path)
    g = load_graph(graph_path)
    e = read_embeddings(emb_path)
    if nodes is None:
        nodes = [v for v in g.labels if v not in e]
    labels, rows = [], []
    for v in nodes:
        try:
            rows.append(mimic.mimic_infer(model, v, g, e))
        except ColdNodeError:
            continue
        labels.append(v)
    table = np.array(rows, dtype=np.float32).reshape(len(rows), e.dimension)
    out = EmbeddingSet(table, None, labels, e.graph_id)
    write_embeddings(out, out_path)
    write_meta(out_path, stage="mimic-infer", seed=cfg.seed, inferred=len(labels),
               skipped=len(nodes) - len(labels))
    return out


def _fill_from(tables):
    """Fill function over per-source tables of precomputed vectors."""
    def fill(i, entity):
        t = tables.get(i)
        if t is None or entity not in t:
            raise ColdNodeError(entity)
        return t.vector(entity)
    return fill


def _load_embs(cfg, paths):
    check_seed(cfg.seed, *[p for p in paths if p])
    out = []
    for p in paths:
        if p:
            _require(p, "an embedding file")
            out.append(read_embeddings(p, graph_id=os.path.basename(p).split(".")[0]))
        else:
            out.append(None)
    return out


def buying_dataset(cfg, pairs_graph_path, friendship_emb, transaction_emb, attribute_emb,
                   transaction_mimic=None):
    """Link-prediction rows for the users of ``pairs_graph_path``.

    Positives are its edges; an equal number of negatives is drawn from its
    complement. Layout: [user-friendship | user-transaction |
    seller-transaction | seller-attribute].
    """
    _require(pairs_graph_path, "a bipartite edge list")
    check_seed(cfg.seed, pairs_graph_path)
    g = load_graph(pairs_graph_path)
    ef, et, ea, tm = _load_embs(cfg, [friendship_emb, transaction_emb, attribute_emb,
                                      transaction_mimic])
    pos = g.edges()
    rng = np.random.default_rng([cfg.seed, _SALT_NEGATIVES])
    neg = complement_negative_sample(g, len(pos), rng)
    if neg.exhausted:
        logger.warning("complement exhausted: %d negatives for %d positives", len(neg.pairs), len(pos))
    policy = fusion.MIMIC_FILL if tm is not None else fusion.ZERO_FILL
    ufill = _fill_from({1: tm}) if tm is not None else None
    rows, labels = [], []
    for lab, pairs in ((1, pos), (0, neg.pairs)):
        for u, s in pairs:
            rows.append(fusion.fuse_pair(g.labels[u], g.labels[s], [ef, et], [et, ea],
                                         policy, ufill))
            labels.append(lab)
    origins = (fusion.source_origins([ef, et], "user.") +
               fusion.source_origins([et, ea], "seller."))
    return fusion.build_dataset(rows, labels, origins)


def credit_dataset(cfg, labels_path, friendship_emb, transaction_emb=None, transaction_mimic=None):
    """One row per labeled user: [user-friendship | user-transaction], or
    friendship alone when ``transaction_emb`` is not given."""
    _require(labels_path, "a 'label<TAB>0|1' file")
    check_seed(cfg.seed, labels_path)
    y = synth.read_labels_file(labels_path)
    ef, et, tm = _load_embs(cfg, [friendship_emb, transaction_emb, transaction_mimic])
    sources = [ef] if et is None else [ef, et]
    policy = fusion.MIMIC_FILL if tm is not None else fusion.ZERO_FILL
    fill = _fill_from({1: tm}) if tm is not None else None
    rows = [fusion.fuse(u, sources, policy, fill) for u in y]
    return fusion.build_dataset(rows, list(y.values()), fusion.source_origins(sources, "user."))


def cmd_fuse(cfg, task, out_path, **paths):
    if task == "buying":
        ds = buying_dataset(cfg, paths["pairs"], paths["friendship"], paths["transaction"],
                            paths["attribute"], paths.get("transaction_mimic"))
    elif task in ("credit", "credit-friends-only"):
        trans = paths.get("transaction") if task == "credit" else None
        tm = paths.get("transaction_mimic") if task == "credit" else None
        ds = credit_dataset(cfg, paths["labels"], paths["friendship"], trans, tm)
    else:
        raise ValueError(f"task must be one of {TASKS}")
    write_dataset(ds, out_path)
    with open(out_path + ".columns", "w", encoding="utf-8") as fh:
        fh.write("\n".join(ds.feature_origin) + "\n")
    write_meta(out_path, stage="fuse", seed=cfg.seed, task=task, rows=ds.n_rows,
               features=ds.n_features, positives=int(ds.labels.sum()))
    return ds


def _read_columns(path):
    cols = path + ".columns"
    if os.path.exists(cols):
        with open(cols, encoding="utf-8") as fh:
            return [ln.strip() for ln in fh if ln.strip()]
    return ()


def default_kind(task):
    return "mlp" if task == "buying" else "logreg"


def classifier_config(cfg, kind):
    cs = cfg.classify
    return clf.ClassifierConfig(kind=kind, C=cs.C, k=cs.k, hidden=cs.hidden, lr=cs.lr,
                                max_iter=cs.max_iter, standardize=cs.standardize, seed=cfg.seed)


def cmd_classify(cfg, dataset_path, out_prefix, kind=None):
    """Split, optionally select features, train, and score the test side.

    Writes ``<prefix>.model``, ``<prefix>.pred`` (test rows) and, with
    feature selection, ``<prefix>.rfe``.
    """
    _require(dataset_path, "a dataset file")
    check_seed(cfg.seed, dataset_path)
    kind = kind or cfg.classify.kind or "logreg"
    ds = read_dataset(dataset_path, _read_columns(dataset_path))
    train_ds, test_ds = clf.stratified_split(ds, clf.SplitSpec(cfg.classify.train_fraction, True, cfg.seed))
    cols = np.arange(ds.n_features)
    if cfg.classify.rfe:
        res = fusion.rfe_select(train_ds, seed=cfg.seed)
        cols = res.selected
        with open(out_prefix + ".rfe", "w", encoding="utf-8") as fh:
            fh.write("selected=" + ",".join(map(str, cols)) + "\n")
            for size in sorted(res.cv_scores):
                fh.write(f"cv.{size}={float(res.cv_scores[size])!r}\n")
        train_ds, test_ds = train_ds.select_columns(cols), test_ds.select_columns(cols)
    model = clf.fit(train_ds, classifier_config(cfg, kind))
    clf.save_model(model, out_prefix + ".model")
    scores = model.predict_proba(test_ds.matrix)
    clf.write_predictions(out_prefix + ".pred", test_ds.entity_ids, test_ds.labels, scores)
    for p in (out_prefix + ".model", out_prefix + ".pred"):
        write_meta(p, stage="classify", seed=cfg.seed, kind=kind, train_rows=train_ds.n_rows,
                   test_rows=test_ds.n_rows, features=len(cols))
    return model, train_ds, test_ds


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_evaluate(cfg, pred_path, out_prefix):
    """Report, ROC CSV, percent table and class-1 threshold sweep."""
    _require(pred_path, "a predictions file")
    check_seed(cfg.seed, pred_path)
    _, y, scores = clf.read_predictions(pred_path)
    rep = ev.evaluate_scores(y, scores, cfg.classify.threshold)
    ev.write_report(rep, out_prefix + ".report", out_prefix + ".roc.csv")
    with open(out_prefix + ".table", "w", encoding="utf-8") as fh:
        fh.write(ev.render_table(rep))
    sweep = ev.threshold_sweep(y, scores, _floats(cfg.eval.sweep))
    with open(out_prefix + ".sweep.csv", "w", encoding="utf-8") as fh:
        fh.write("threshold,precision1,recall1,defined\n")
        for t, p, r, d in sweep:
            fh.write(f"{t!r},{p!r},{r!r},{int(d)}\n")
    write_meta(out_prefix + ".report", stage="evaluate", seed=cfg.seed, predictions=os.path.basename(pred_path))
    return rep, sweep


def cmd_learning_curve(cfg, dataset_path, out_path, kind=None):
    _require(dataset_path, "a dataset file")
    check_seed(cfg.seed, dataset_path)
    kind = kind or cfg.classify.kind or "logreg"
    ds = read_dataset(dataset_path)
    ccfg = classifier_config(cfg, kind)
    points = ev.learning_curve(lambda d: clf.fit(d, ccfg), ds, _floats(cfg.eval.curve),
                               cfg.eval.folds, cfg.seed, cfg.classify.threshold)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("fraction,n_train,train_mean,train_sd,cv_mean,cv_sd\n")
        for p in points:
            fh.write(f"{p.fraction!r},{p.n_train},{p.train_mean!r},{p.train_sd!r},"
                     f"{p.cv_mean!r},{p.cv_sd!r}\n")
    return points


def run_e2e(cfg, task, outdir):
    """synth -> embed (x3) -> mimic -> fuse -> split/train -> evaluate.

    Returns the metrics report; writes ``e2e.manifest`` with the resolved
    configuration and the list of artifacts.
    """
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}")
    os.makedirs(outdir, exist_ok=True)
    j = lambda name: os.path.join(outdir, name)  # noqa: E731
    data_dir = j("data")
    cmd_synth(cfg, data_dir)
    d = lambda name: os.path.join(data_dir, name)  # noqa: E731
    cmd_train_embed(cfg, d("friendship.edges"), j("friendship.emb"))
    cmd_train_embed(cfg, d("purchases.edges"), j("transaction.emb"))
    if task == "buying":
        cmd_train_embed(cfg, d("attributes.edges"), j("attribute.emb"))
    if task != "credit-friends-only":
        cmd_mimic_train(cfg, d("friendship.edges"), j("transaction.emb"), j("transaction.mimic"))
        cmd_mimic_infer(cfg, j("transaction.mimic"), d("friendship.edges"), j("transaction.emb"),
                        j("transaction_mimic.emb"))
    if task == "buying":
        cmd_fuse(cfg, task, j("dataset.txt"), pairs=d("purchases_cold.edges"),
                 friendship=j("friendship.emb"), transaction=j("transaction.emb"),
                 attribute=j("attribute.emb"), transaction_mimic=j("transaction_mimic.emb"))
    else:
        cmd_fuse(cfg, task, j("dataset.txt"), labels=d("credit.labels"),
                 friendship=j("friendship.emb"), transaction=j("transaction.emb"),
                 transaction_mimic=j("transaction_mimic.emb"))
    kind = cfg.classify.kind or default_kind(task)
    cmd_classify(cfg, j("dataset.txt"), j("classifier"), kind)
    rep, _ = cmd_evaluate(cfg, j("classifier.pred"), j("eval"))
    if task != "buying":
        cmd_learning_curve(cfg, j("dataset.txt"), j("learning_curve.csv"), kind)
    artifacts = sorted(os.path.relpath(os.path.join(root, f), outdir)
                       for root, _, files in os.walk(outdir) for f in files
                       if f != "e2e.manifest")
    with open(j("e2e.manifest"), "w", encoding="utf-8") as fh:
        fh.write(f"task={task}\nclassifier={kind}\n")
        for k, v in cfg.items():
            fh.write(f"{k}={v}\n")
        fh.write("artifacts=" + json.dumps(artifacts) + "\n")
        fh.write("digests=" + json.dumps({a: _crc(os.path.join(outdir, a)) for a in artifacts},
                                         sort_keys=True) + "\n")
    return rep


def _crc(path):
    with open(path, "rb") as fh:
        return f"{zlib.crc32(fh.read()):08x}"

