"""Pipeline driver: every stage is a subcommand writing into one run directory.

Stages communicate only through files. Each command validates its inputs,
names the stage that produces a missing artifact, and records what it read
and wrote in manifest.json with content hashes. Reruns with unchanged
inputs overwrite byte-identically.

Exit codes: 0 success, 1 failure (bad config, degenerate data, non-finite
results), 2 missing upstream artifact.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import platform
import sys
from pathlib import Path

import click
import matplotlib
import numpy as np
import scipy
import yaml

matplotlib.use("Agg")

from stylefuse import __version__
from stylefuse.augment import (
    AugmentConfig,
    augment_pairs,
    augment_report,
    feature_scorer,
    save_augmented,
)
from stylefuse.bayes import (
    FitConfig,
    ModelConfig,
    fit_feature_correlation,
    forest_plot,
    results_to_csv,
)
from stylefuse.bayes.correlation import results_from_csv
from stylefuse.corpus import Corpus, Document, EmbeddingSequence, load_corpus, save_corpus
from stylefuse.evaluate import (
    agreement_score,
    load_external_scores,
    mean_rouge,
    rouge_to_csv,
    significance_report,
    significance_to_csv,
)
from stylefuse.features import (
    DEFAULT_REGISTRY,
    NATIVE_FEATURES,
    FeatureMatrix,
    build_matrix,
    extract_features,
    features_from_tokens,
    matrix_from_csv,
    stats_to_csv,
)
from stylefuse.infuse import (
    BOS,
    EOS,
    InfusionConfig,
    TrainingPair,
    generate_record,
    load_lm,
    new_lm,
    postprocess,
    sample_sequence,
    save_lm,
    strip_boundaries,
    token_discriminator,
    train,
    write_generations,
    write_loss_curves,
)
from stylefuse.ranker import RankerConfig, cross_validate, load_ranker, save_ranker, train_ranker
from stylefuse.synthetic import infusion_pairs, synthetic_corpus


class MissingArtifact(Exception):
    def __init__(self, stage: str, path: Path):
        super().__init__(f"missing {stage} artifact: {path} (run the {stage} stage first)")


def _require(run: Path, relpath: str, stage: str) -> Path:
    path = run / relpath
    if not path.exists():
        raise MissingArtifact(stage, path)
    return path


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    raw = yaml.safe_load(Path(path).read_text())
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config root must be a mapping")
    return raw


def _section(config: dict, name: str, allowed: tuple[str, ...]) -> dict:
    section = config.get(name, {})
    if section is None:
        section = {}
    if not isinstance(section, dict):
        raise ValueError(f"config section {name!r} must be a mapping")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ValueError(f"unknown {name} option {unknown[0]!r}")
    return section


def _resolve_seed(config: dict, override: int | None) -> int:
    if override is not None:
        return override
    seed = config.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    return seed


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _hash_paths(run: Path, paths) -> dict[str, str]:
    out = {}
    for p in paths:
        p = Path(p)
        try:
            key = p.relative_to(run).as_posix()
        except ValueError:
            key = p.as_posix()  # source file outside the run directory
        out[key] = _sha256(p)
    return out


def _versions() -> dict[str, str]:
    return {
        "python": platform.python_version(),
        "stylefuse": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
        "click": click.__version__,
        "pyyaml": yaml.__version__,
    }


def _record_stage(run: Path, stage: str, section: dict, seed: int, inputs, outputs) -> None:
    manifest_path = run / "manifest.json"
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {"stages": {}}
    config_hash = hashlib.sha256(
        json.dumps({"seed": seed, "settings": section}, sort_keys=True).encode()
    ).hexdigest()
    manifest["stages"][stage] = {
        "config_hash": config_hash,
        "seed": seed,
        "inputs": _hash_paths(run, inputs),
        "outputs": _hash_paths(run, outputs),
        "versions": _versions(),
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _stage(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            fn(*args, **kwargs)
        except MissingArtifact as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except Exception as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _common(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="YAML run configuration.")(fn)
    fn = click.option("--seed", type=click.IntRange(min=0), default=None, help="Override the configured seed.")(fn)
    fn = click.option("--out", "out_dir", type=click.Path(file_okay=False), default="run", show_default=True, help="Run directory.")(fn)
    return fn


@click.group()
@click.version_option(version=__version__)
def main():
    """Style-preference pipeline: ingest through report, one run directory."""


# ---------------------------------------------------------------- ingest

def _prefixed_external(style_seed: int, n_docs: int, n_topics: int) -> Corpus:
    raw = synthetic_corpus(n_docs=n_docs, n_pairs=0, seed=style_seed + 1, n_topics=n_topics)
    out = Corpus()
    for k, did in enumerate(sorted(raw.documents)):
        doc = raw.documents[did]
        new_id = f"ext{k:03d}"
        out.documents[new_id] = Document(id=new_id, text=doc.text, topic=doc.topic, source="external_corpus")
        seq = raw.embeddings[did]
        out.embeddings[new_id] = EmbeddingSequence(new_id, seq.vectors, unit=seq.unit)
    out.validate()
    return out


@main.command()
@_common
@_stage
def ingest(config_path, seed, out_dir):
    """Materialize the style corpus and the external candidate pool."""
    config = _load_config(config_path)
    section = _section(config, "corpus", ("path", "external_path", "n_docs", "n_pairs", "n_topics", "external_docs"))
    seed = _resolve_seed(config, seed)
    run = Path(out_dir)
    run.mkdir(parents=True, exist_ok=True)

    inputs = []
    if "path" in section:
        corpus = load_corpus(section["path"])
        inputs.extend(sorted(Path(section["path"]).glob("*")))
    else:
        corpus = synthetic_corpus(
            n_docs=int(section.get("n_docs", 120)),
            n_pairs=int(section.get("n_pairs", 200)),
            seed=seed,
            n_topics=int(section.get("n_topics", 4)),
        )
    outputs = list(save_corpus(corpus, run / "corpus").values())

    if "external_path" in section:
        external = load_corpus(section["external_path"])
        inputs.extend(sorted(Path(section["external_path"]).glob("*")))
    else:
        external = _prefixed_external(seed, int(section.get("external_docs", 40)), int(section.get("n_topics", 4)))
    outputs.extend(save_corpus(external, run / "external").values())

    inputs = [p for p in inputs if Path(p).is_file()]
    _record_stage(run, "ingest", section, seed, inputs, outputs)
    click.echo(f"ingest: {len(corpus.documents)} documents, {len(corpus.judgments)} judgments, {len(external.documents)} candidates")


# -------------------------------------------------------------- features

@main.command()
@_common
@_stage
def features(config_path, seed, out_dir):
    """Raw and standardized feature matrices for the style corpus."""
    config = _load_config(config_path)
    section = _section(config, "features", ("registry",))
    seed = _resolve_seed(config, seed)
    run = Path(out_dir)
    docs = _require(run, "corpus/documents.jsonl", "ingest")

    registry = section.get("registry", list(DEFAULT_REGISTRY))
    corpus = load_corpus(run / "corpus")
    raw = build_matrix(corpus, registry, standardize=False)
    standardized = build_matrix(corpus, registry, standardize=True)

    raw.write_csv(run / "features.csv")
    standardized.write_csv(run / "standardized.csv")
    stats_to_csv(standardized, run / "feature_stats.csv")
    outputs = [run / "features.csv", run / "standardized.csv", run / "feature_stats.csv"]
    _record_stage(run, "features", section, seed, [docs], outputs)
    click.echo(f"features: {len(raw.doc_ids)} documents x {len(raw.names)} features ({len(standardized.constant_columns)} constant)")


def _usable_columns(matrix: FeatureMatrix, restrict_to: tuple[str, ...] | None = None) -> list[str]:
    return [
        n
        for n in matrix.names
        if (restrict_to is None or n in restrict_to)
        and n not in matrix.constant_columns
        and not np.isnan(matrix.column(n)).any()
    ]


def _select_columns(matrix: FeatureMatrix, names: list[str]) -> FeatureMatrix:
    idx = [matrix.names.index(n) for n in names]
    return FeatureMatrix(
        doc_ids=list(matrix.doc_ids),
        names=list(names),
        values=matrix.values[:, idx],
        standardized=matrix.standardized,
        means=None if matrix.means is None else matrix.means[idx],
        sds=None if matrix.sds is None else matrix.sds[idx],
        constant_columns=[n for n in names if n in matrix.constant_columns],
    )


# -------------------------------------------------------------- fit-bayes

@main.command("fit-bayes")
@_common
@_stage
def fit_bayes(config_path, seed, out_dir):
    """Posterior slope of each configured feature on pair outcomes."""
    config = _load_config(config_path)
    section = _section(
        config, "bayes",
        ("features", "warmup", "samples", "chains", "target_accept", "max_depth", "prior_scale", "scale_is_variance"),
    )
    seed = _resolve_seed(config, seed)
    run = Path(out_dir)
    std_path = _require(run, "standardized.csv", "features")
    stats_path = _require(run, "feature_stats.csv", "features")
    _require(run, "corpus/judgments.jsonl", "ingest")

    matrix = matrix_from_csv(std_path, stats_path=stats_path)
    judgments = load_corpus(run / "corpus").judgments
    names = section.get("features", ["token_count", "flesch", "ttr"])
    # The pipeline default prior is weakly informative; the module default
    # (0.25) shrinks the pooled slope too hard for decisive run reports.
    fit = FitConfig(
        warmup=int(section.get("warmup", 200)),
        samples=int(section.get("samples", 250)),
        chains=int(section.get("chains", 2)),
        seed=seed,
        target_accept=float(section.get("target_accept", 0.7)),
        max_depth=int(section.get("max_depth", 8)),
        model=ModelConfig(
            prior_scale=float(section.get("prior_scale", 1.0)),
            scale_is_variance=bool(section.get("scale_is_variance", False)),
        ),
    )
    results = [fit_feature_correlation(judgments, matrix, name, fit) for name in names]
    results_to_csv(results, run / "correlations.csv")
    _record_stage(
        run, "fit-bayes", section, seed,
        [std_path, stats_path, run / "corpus/judgments.jsonl"],
        [run / "correlations.csv"],
    )
    for r in results:
        tag = "decisive" if r.interval_excludes_zero() else "undecided"
        click.echo(f"fit-bayes: {r.feature} pooled {r.pooled_mean:+.3f} [{r.pooled_q5:+.3f}, {r.pooled_q95:+.3f}] {tag}")


# ------------------------------------------------------------ train-ranker

@main.command("train-ranker")
@_common
@_stage
def train_ranker_cmd(config_path, seed, out_dir):
    """Cross-validated pairwise ranker on fully observed features."""
    config = _load_config(config_path)
    section = _section(config, "ranker", ("features", "folds", "epochs", "learning_rate", "l2"))
    seed = _resolve_seed(config, seed)
    run = Path(out_dir)
    std_path = _require(run, "standardized.csv", "features")
    stats_path = _require(run, "feature_stats.csv", "features")
    _require(run, "corpus/judgments.jsonl", "ingest")

    matrix = matrix_from_csv(std_path, stats_path=stats_path)
    # Text-only features by default: the saved ranker must also score bare
    # token sequences, which carry no annotations or embeddings.
    names = section.get("features") or _usable_columns(matrix, restrict_to=NATIVE_FEATURES)
    subset = _select_columns(matrix, names)
    judgments = load_corpus(run / "corpus").judgments
    ranker_config = RankerConfig(
        learning_rate=float(section.get("learning_rate", 0.1)),
        epochs=int(section.get("epochs", 300)),
        l2=float(section.get("l2", 1e-4)),
        seed=seed,
    )
    folds = int(section.get("folds", 5))
    accuracies = cross_validate(judgments, subset, folds, ranker_config)
    ranker = train_ranker(judgments, subset, ranker_config)
    save_ranker(ranker, run / "ranker.json")
    with open(run / "cv.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fold", "accuracy"])
        for i, acc in enumerate(accuracies):
            writer.writerow([i, repr(acc)])
    _record_stage(
        run, "train-ranker", section, seed,
        [std_path, stats_path, run / "corpus/judgments.jsonl"],
        [run / "ranker.json", run / "cv.csv"],
    )
    click.echo(f"train-ranker: {len(names)} features, mean CV accuracy {float(np.mean(accuracies)):.3f}")


# ---------------------------------------------------------------- augment

@main.command()
@_common
@_stage
def augment(config_path, seed, out_dir):
    """Weakly labeled pairs from external candidates vs styled neighbors."""
    config = _load_config(config_path)
    section = _section(config, "augment", ("k", "min_score", "max_new_pairs"))
    seed = _resolve_seed(config, seed)
    run = Path(out_dir)
    ranker_path = _require(run, "ranker.json", "train-ranker")
    _require(run, "corpus/documents.jsonl", "ingest")
    _require(run, "external/documents.jsonl", "ingest")

    ranker = load_ranker(ranker_path)
    style = load_corpus(run / "corpus")
    external = load_corpus(run / "external")
    vectors = {}
    for corpus in (style, external):
        for did in sorted(corpus.documents):
            vectors[did] = extract_features(corpus.documents[did], corpus, ranker.feature_names)
    scorer = feature_scorer(ranker, vectors)
    aug_config = AugmentConfig(
        k=int(section.get("k", 3)),
        min_score=float(section.get("min_score", 0.5)),
        max_new_pairs=section.get("max_new_pairs", 50),
        seed=seed,
    )
    result = augment_pairs(external, style, scorer, aug_config)
    save_augmented(result, run / "augmented")
    report = augment_report(result)
    (run / "augment_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    outputs = [run / "augmented/judgments.jsonl", run / "augmented/provenance.tsv", run / "augment_report.json"]
    _record_stage(
        run, "augment", section, seed,
        [ranker_path, run / "corpus/documents.jsonl", run / "external/documents.jsonl"],
        outputs,
    )
    click.echo(f"augment: scanned {report['candidates_scanned']} candidates, added {report['pairs_added']} pairs")


# ------------------------------------------------------------ train-infuse

def _pairs_to_jsonl(pairs: list[TrainingPair], path: Path) -> None:
    with open(path, "w") as fh:
        for p in pairs:
            fh.write(json.dumps({"prompt": p.prompt, "styled": p.y_s_star, "plain": p.y_ns_star}) + "\n")


def _pairs_from_jsonl(path: Path) -> list[TrainingPair]:
    pairs = []
    for line in Path(path).read_text().splitlines():
        rec = json.loads(line)
        pairs.append(TrainingPair(list(rec["prompt"]), list(rec["styled"]), list(rec["plain"])))
    return pairs


@main.command("train-infuse")
@_common
@_stage
def train_infuse(config_path, seed, out_dir):
    """Train the toy generator against the ranker-backed discriminator."""
    config = _load_config(config_path)
    section = _section(
        config, "infuse",
        ("loss_mode", "beta", "w_d", "w_r", "learning_rate", "baseline_lr", "epochs", "beam_width", "max_tokens", "n_pairs", "order"),
    )
    seed = _resolve_seed(config, seed)
    run = Path(out_dir)
    ranker_path = _require(run, "ranker.json", "train-ranker")

    vocab, pairs = infusion_pairs(n_pairs=int(section.get("n_pairs", 8)), seed=seed)
    lm = new_lm(vocab, order=int(section.get("order", 1)), seed=seed)
    infusion_config = InfusionConfig(
        loss_mode=str(section.get("loss_mode", "SD")),
        beta=float(section.get("beta", 0.5)),
        w_d=float(section.get("w_d", 0.1)),
        w_r=float(section.get("w_r", 0.9)),
        learning_rate=float(section.get("learning_rate", 0.1)),
        baseline_lr=float(section.get("baseline_lr", 0.05)),
        epochs=int(section.get("epochs", 30)),
        beam_width=int(section.get("beam_width", 4)),
        max_tokens=int(section.get("max_tokens", 20)),
        seed=seed,
    )
    discriminator = token_discriminator(load_ranker(ranker_path))
    result = train(lm, pairs, discriminator, infusion_config)

    (run / "infusion").mkdir(parents=True, exist_ok=True)
    save_lm(result.lm, result.head, run / "infusion/model.json")
    write_loss_curves(result.curves, run / "infusion/loss_curves.csv")
    _pairs_to_jsonl(pairs, run / "infusion/pairs.jsonl")
    (run / "infusion/config.json").write_text(
        json.dumps({"loss_mode": infusion_config.loss_mode, "beta": infusion_config.beta,
                    "beam_width": infusion_config.beam_width, "max_tokens": infusion_config.max_tokens},
                   indent=2, sort_keys=True) + "\n"
    )
    outputs = [run / "infusion/model.json", run / "infusion/loss_curves.csv", run / "infusion/pairs.jsonl", run / "infusion/config.json"]
    _record_stage(run, "train-infuse", section, seed, [ranker_path], outputs)
    last = result.curves[-1]
    click.echo(f"train-infuse: {infusion_config.epochs} epochs, final l_total {last.l_total:.4f} (l_r {last.l_r:.4f}, l_disc {last.l_disc:.4f})")


# --------------------------------------------------------------- generate

@main.command()
@_common
@_stage
def generate(config_path, seed, out_dir):
    """Beam and sampled generations from the trained model."""
    config = _load_config(config_path)
    section = _section(config, "generate", ("prompts", "n_sampled", "max_tokens", "beam_width"))
    seed = _resolve_seed(config, seed)
    run = Path(out_dir)
    model_path = _require(run, "infusion/model.json", "train-infuse")
    config_json = _require(run, "infusion/config.json", "train-infuse")

    lm, _ = load_lm(model_path)
    stored = json.loads(config_json.read_text())
    gen_config = InfusionConfig(
        loss_mode=stored["loss_mode"],
        beta=stored["beta"],
        beam_width=int(section.get("beam_width", stored["beam_width"])),
        max_tokens=int(section.get("max_tokens", stored["max_tokens"])),
        seed=seed,
    )
    prompts = section.get("prompts", [[]])
    records = []
    for prompt in prompts:
        rec = generate_record(lm, [str(t) for t in prompt], gen_config)
        rec["mode"] = "beam"
        records.append(rec)
    rng = np.random.default_rng([seed, 5])
    for _ in range(int(section.get("n_sampled", 20))):
        sample = sample_sequence(lm, [], rng, max_tokens=gen_config.max_tokens)
        records.append(
            {
                "prompt": "",
                "text": postprocess(" ".join(strip_boundaries(sample.tokens))),
                "tokens": sample.tokens,
                "log_probs": [float(v) for v in sample.log_probs],
                "mode": "sample",
            }
        )
    write_generations(records, run / "generations.jsonl")
    _record_stage(run, "generate", section, seed, [model_path, config_json], [run / "generations.jsonl"])
    click.echo(f"generate: {len(prompts)} beam + {len(records) - len(prompts)} sampled generations")


# --------------------------------------------------------------- evaluate

def _generation_matrix(records: list[dict], names: list[str]) -> FeatureMatrix:
    rows, ids = [], []
    for i, rec in enumerate(records):
        tokens = [t for t in rec["tokens"] if t not in (BOS, EOS)]
        values = features_from_tokens([tokens], text=rec["text"]) if tokens else {}
        rows.append([np.nan if values.get(n) is None else float(values[n]) for n in names])
        ids.append(f"gen{i:03d}")
    return FeatureMatrix(ids, list(names), np.array(rows, dtype=float).reshape(len(ids), len(names)))


@main.command()
@_common
@_stage
def evaluate(config_path, seed, out_dir):
    """Reconstruction overlap and feature-shift significance of generations."""
    config = _load_config(config_path)
    section = _section(config, "evaluate", ("external_scores", "max_refs"))
    seed = _resolve_seed(config, seed)
    run = Path(out_dir)
    gen_path = _require(run, "generations.jsonl", "generate")
    pairs_path = _require(run, "infusion/pairs.jsonl", "train-infuse")
    corr_path = _require(run, "correlations.csv", "fit-bayes")
    _require(run, "corpus/documents.jsonl", "ingest")

    records = [json.loads(line) for line in gen_path.read_text().splitlines()]
    if not records:
        raise ValueError("generations.jsonl is empty")
    pairs = _pairs_from_jsonl(pairs_path)
    correlations = results_from_csv(corr_path)
    corpus = load_corpus(run / "corpus")

    styled_texts = [" ".join(strip_boundaries(p.y_s_star)) for p in pairs]
    rouge = {}
    for mode in ("beam", "sample"):
        texts = [r["text"] for r in records if r["mode"] == mode]
        if texts:
            rouge[f"{mode}_vs_styled"] = mean_rouge(
                [(styled_texts[i % len(styled_texts)], t) for i, t in enumerate(texts)]
            )
    rouge["styled_self"] = mean_rouge([(t, t) for t in styled_texts])
    external = None
    if "external_scores" in section:
        external = load_external_scores(section["external_scores"])
    (run / "eval").mkdir(parents=True, exist_ok=True)
    rouge_to_csv(rouge, run / "eval/rouge.csv", external=external)

    names = [c.feature for c in correlations]
    baseline = build_matrix(corpus, names, standardize=False)
    model = _generation_matrix(records, names)
    report = significance_report(baseline, model, correlations)
    significance_to_csv(report, run / "eval/shifts.csv")
    agreement = agreement_score(report, correlations)
    (run / "eval/agreement.txt").write_text(repr(agreement) + "\n")

    outputs = [run / "eval/rouge.csv", run / "eval/shifts.csv", run / "eval/agreement.txt"]
    _record_stage(
        run, "evaluate", section, seed,
        [gen_path, pairs_path, corr_path, run / "corpus/documents.jsonl"],
        outputs,
    )
    click.echo(f"evaluate: {len(report.rows)} feature shifts, agreement {agreement:.1f}")


# ----------------------------------------------------------------- report

def _savefig(fig, path: Path) -> None:
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "stylefuse"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _loss_curves_figure(rows: list[dict]):
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    epochs = [int(r["epoch"]) for r in rows]
    for key, style in (("l_r", "-"), ("l_disc", "--"), ("l_total", "-."), ("c_mean", ":")):
        ax.plot(epochs, [float(r[key]) for r in rows], style, label=key)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend(loc="best")
    ax.set_title("Infusion training")
    fig.tight_layout()
    return fig


def _shifts_figure(rows: list[dict]):
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 0.6 * max(len(rows), 2) + 1.5))
    labels = [r["feature"] for r in rows]
    t_values = [float(r["t"]) for r in rows]
    colors = ["#2a7" if r["direction"] == "correct" else "#c44" if r["direction"] == "incorrect" else "#888" for r in rows]
    y = np.arange(len(rows))
    ax.barh(y, t_values, color=colors)
    ax.axvline(0.0, color="black", linewidth=0.8)
    ax.set_yticks(y)
    ax.set_yticklabels(labels)
    ax.invert_yaxis()
    ax.set_xlabel("Welch t (corpus baseline vs generations)")
    ax.set_title("Feature shifts")
    fig.tight_layout()
    return fig


def _read_csv_rows(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _fmt(value: str) -> str:
    try:
        return f"{float(value):.4g}"
    except ValueError:
        return value


@main.command()
@_common
@_stage
def report(config_path, seed, out_dir):
    """Markdown summary plus SVG figures, rendered from stage artifacts."""
    config = _load_config(config_path)
    section = _section(config, "report", ())
    seed = _resolve_seed(config, seed)
    run = Path(out_dir)
    corr_path = _require(run, "correlations.csv", "fit-bayes")
    cv_path = _require(run, "cv.csv", "train-ranker")
    aug_path = _require(run, "augment_report.json", "augment")
    loss_path = _require(run, "infusion/loss_curves.csv", "train-infuse")
    shifts_path = _require(run, "eval/shifts.csv", "evaluate")
    rouge_path = _require(run, "eval/rouge.csv", "evaluate")
    agree_path = _require(run, "eval/agreement.txt", "evaluate")

    out = run / "report"
    out.mkdir(parents=True, exist_ok=True)
    correlations = results_from_csv(corr_path)
    forest_plot(correlations, out / "forest.svg")
    loss_rows = _read_csv_rows(loss_path)
    _savefig(_loss_curves_figure(loss_rows), out / "loss_curves.svg")
    shift_rows = _read_csv_rows(shifts_path)
    _savefig(_shifts_figure(shift_rows), out / "shifts.svg")

    cv_rows = _read_csv_rows(cv_path)
    accuracies = [float(r["accuracy"]) for r in cv_rows]
    aug = json.loads(aug_path.read_text())
    rouge_rows = _read_csv_rows(rouge_path)
    agreement = float(agree_path.read_text().strip())
    last = loss_rows[-1]

    lines = [
        "# Run report",
        "",
        "## Preference slopes",
        "",
        "| feature | pooled mean | 90% interval | decisive |",
        "|---|---|---|---|",
    ]
    for c in correlations:
        decisive = "yes" if c.interval_excludes_zero() else "no"
        lines.append(f"| {c.feature} | {c.pooled_mean:.4g} | [{c.pooled_q5:.4g}, {c.pooled_q95:.4g}] | {decisive} |")
    lines += [
        "",
        "![forest](forest.svg)",
        "",
        "## Ranker cross-validation",
        "",
        f"Mean accuracy {np.mean(accuracies):.4g} over {len(accuracies)} folds "
        f"(min {min(accuracies):.4g}, max {max(accuracies):.4g}).",
        "",
        "## Augmentation",
        "",
        f"Scanned {aug['candidates_scanned']} candidates, added {aug['pairs_added']} pairs.",
        "",
        "## Infusion training",
        "",
        f"Final epoch {last['epoch']}: l_total {_fmt(last['l_total'])}, "
        f"l_r {_fmt(last['l_r'])}, l_disc {_fmt(last['l_disc'])}, c_mean {_fmt(last['c_mean'])}.",
        "",
        "![loss curves](loss_curves.svg)",
        "",
        "## Feature shifts",
        "",
        "| feature | baseline mean | generation mean | t | p | direction |",
        "|---|---|---|---|---|---|",
    ]
    for r in shift_rows:
        lines.append(
            f"| {r['feature']} | {_fmt(r['baseline_mean'])} | {_fmt(r['model_mean'])} "
            f"| {_fmt(r['t'])} | {_fmt(r['p'])} | {r['direction'] or 'n/a'} |"
        )
    lines += [
        "",
        f"Agreement score: {agreement:.4g}",
        "",
        "![shifts](shifts.svg)",
        "",
        "## Reconstruction overlap",
        "",
        "| comparison | ROUGE-1 f1 | ROUGE-2 f1 | ROUGE-L f1 |",
        "|---|---|---|---|",
    ]
    for r in rouge_rows:
        lines.append(f"| {r['label']} | {_fmt(r['rouge1_f1'])} | {_fmt(r['rouge2_f1'])} | {_fmt(r['rougeL_f1'])} |")
    lines.append("")
    (out / "report.md").write_text("\n".join(lines))

    outputs = [out / "report.md", out / "forest.svg", out / "loss_curves.svg", out / "shifts.svg"]
    _record_stage(
        run, "report", section, seed,
        [corr_path, cv_path, aug_path, loss_path, shifts_path, rouge_path, agree_path],
        outputs,
    )
    click.echo(f"report: wrote {out / 'report.md'}")


if __name__ == "__main__":
    main()
