"""Figure rendering: layer-wise t-SNE scatters and training curves."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from sklearn.manifold import TSNE

from .errors import PrepError, PrepFormatError
from .features import Features, read_tsvf

METRIC_COLUMNS = ["trial", "epoch", "train_loss", "train_acc", "test_loss", "test_acc"]


def _embed_layer(features: Features, layer: int, seed: int, perplexity: float):
    vectors, labels = features.layer_slice(layer)
    if len(vectors) == 0:
        raise PrepError(f"feature file has no records for layer {layer}")
    perp = min(perplexity, (len(vectors) - 1) / 3)
    tsne = TSNE(n_components=2, perplexity=perp, random_state=seed, init="pca")
    return tsne.fit_transform(vectors.astype(np.float64)), labels


def plot_tsne(feature_file, layers, out_image, seed: int = 0, perplexity: float = 30.0):
    """One 2-D scatter per selected layer, points colored by label.

    ``layers`` is an iterable of layer indices (0 = embedding stage) or the
    string ``"all"``.  Returns [(layer, path, embedding, labels), ...]; the
    embeddings are deterministic for a fixed seed.
    """
    features = read_tsvf(feature_file)
    if isinstance(layers, str):
        if layers != "all":
            raise PrepError(f"unknown layer selector {layers!r}")
        layers = list(range(features.blocks + 1))
    layers = list(layers)
    if not layers:
        raise PrepError("no layers selected")
    out_image = Path(out_image)
    results = []
    for layer in layers:
        embedding, labels = _embed_layer(features, layer, seed, perplexity)
        if len(layers) == 1:
            path = out_image
        else:
            path = out_image.with_name(f"{out_image.stem}_layer{layer}{out_image.suffix}")
        fig, ax = plt.subplots(figsize=(5, 4))
        for lab in np.unique(labels):
            pts = embedding[labels == lab]
            ax.scatter(pts[:, 0], pts[:, 1], s=8, label=str(lab))
        title = "embedding stage" if layer == 0 else f"block {layer}"
        ax.set_title(f"t-SNE, {title}")
        ax.legend(loc="best", fontsize=6)
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
        results.append((layer, path, embedding, labels))
    return results


def read_metrics_csv(path):
    """Parse a training-metrics CSV into per-trial epoch series.

    Returns {trial: {column: [values by epoch]}}.  Malformed rows raise with
    their line number.
    """
    trials: dict[int, dict[str, list[float]]] = {}
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PrepFormatError(f"{path}:1: empty metrics file") from None
        if header != METRIC_COLUMNS:
            raise PrepFormatError(
                f"{path}:1: expected header {','.join(METRIC_COLUMNS)}, got {','.join(header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(METRIC_COLUMNS):
                raise PrepFormatError(f"{path}:{lineno}: expected {len(METRIC_COLUMNS)} fields")
            try:
                trial = int(row[0])
                epoch = int(row[1])
                values = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise PrepFormatError(f"{path}:{lineno}: {exc}") from None
            series = trials.setdefault(trial, {c: [] for c in METRIC_COLUMNS[2:]})
            expected_epoch = len(series["train_loss"]) + 1
            if epoch != expected_epoch:
                raise PrepFormatError(
                    f"{path}:{lineno}: epoch {epoch} out of order (expected {expected_epoch})"
                )
            for column, value in zip(METRIC_COLUMNS[2:], values):
                series[column].append(value)
    if not trials:
        raise PrepFormatError(f"{path}: no data rows")
    return trials


def plot_curves(metrics_csv, out_image):
    """Loss and accuracy vs epoch: train/test means across trials, with a
    min/max band when more than one trial is present."""
    trials = read_metrics_csv(metrics_csv)
    epochs = max(len(series["train_loss"]) for series in trials.values())
    x = np.arange(1, epochs + 1)

    def stack(column):
        rows = [series[column] for series in trials.values()
                if len(series[column]) == epochs]
        return np.array(rows)

    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.5))
    for ax, columns, ylabel in (
        (ax_loss, ("train_loss", "test_loss"), "loss"),
        (ax_acc, ("train_acc", "test_acc"), "accuracy"),
    ):
        for column in columns:
            data = stack(column)
            mean = data.mean(axis=0)
            ax.plot(x, mean, label=column.replace("_", " "))
            if len(data) > 1:
                ax.fill_between(x, data.min(axis=0), data.max(axis=0), alpha=0.2)
        ax.set_xlabel("epoch")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_image, dpi=120)
    plt.close(fig)
    return {"epochs": epochs, "trials": len(trials)}
