"""Dataset splitting and the LC-IR / LC-SP training loops."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import TooFewItems
from .kinematics import INDICATOR_NAMES
from .models import mtl_loss
from .nn_core import Adam, RmsProp, backward, categorical_cross_entropy, no_grad, one_hot
from .labeling import CLASS_ORDER

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 128
    dropout: float = 0.3
    optimizer: str = "rmsprop"
    learning_rate: float = 1e-3
    seed: int = 0
    split_ratio: float = 0.8
    split_unit: str = "trajectory"
    task_weights: dict | None = None
    target_accuracy: float | None = None   # optional early stop for experiments
    eval_batch_size: int = 256


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    test_loss: list = field(default_factory=list)
    test_accuracy: list = field(default_factory=list)

    def __len__(self):
        return len(self.train_loss)

    def rows(self):
        for i in range(len(self.train_loss)):
            acc = self.test_accuracy[i] if i < len(self.test_accuracy) else ""
            yield i + 1, self.train_loss[i], self.test_loss[i], acc

    def write_csv(self, stream):
        stream.write("epoch,train_loss,test_loss,test_accuracy\n")
        for epoch, tr, te, acc in self.rows():
            acc_s = "" if acc == "" or acc is None else repr(float(acc))
            stream.write(f"{epoch},{tr!r},{te!r},{acc_s}\n")


def _split_ids(ids, ratio, seed):
    ids = sorted(ids)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0x5911))))
    perm = rng.permutation(len(ids))
    n_train = int(round(ratio * len(ids)))
    return {ids[i] for i in perm[:n_train]}, {ids[i] for i in perm[n_train:]}


def split_dataset(items, ratio=0.8, unit="trajectory", seed=0):
    """Disjoint, exhaustive (train, test) split of a list of items.

    unit="trajectory" groups by the items' track_id so every window of a
    track lands on one side; unit="window" splits the items directly.
    """
    if not items:
        raise TooFewItems("cannot split an empty dataset")
    if unit == "trajectory":
        ids = {getattr(it, "track_id") for it in items}
        if len(ids) < 2:
            raise TooFewItems("need at least two trajectories to split")
        train_ids, _ = _split_ids(ids, ratio, seed)
        train = [it for it in items if it.track_id in train_ids]
        test = [it for it in items if it.track_id not in train_ids]
    elif unit == "window":
        if len(items) < 2:
            raise TooFewItems("need at least two items to split")
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0x5912))))
        perm = rng.permutation(len(items))
        n_train = int(round(ratio * len(items)))
        train = [items[i] for i in perm[:n_train]]
        test = [items[i] for i in perm[n_train:]]
    else:
        raise ValueError(f"unknown split unit {unit!r}")
    return train, test


def _make_optimizer(model, config: TrainConfig):
    params = model.parameters()
    if config.optimizer == "rmsprop":
        return RmsProp(params, lr=config.learning_rate)
    if config.optimizer == "adam":
        return Adam(params, lr=config.learning_rate)
    raise ValueError(f"unknown optimizer {config.optimizer!r}")


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    for lo in range(0, n, batch_size):
        yield order[lo:lo + batch_size]


def predict_classifier(model, x, batch_size=256):
    """(n, 3) class probabilities, dropout off, graph-free."""
    outs = []
    with no_grad():
        for lo in range(0, len(x), batch_size):
            outs.append(model(x[lo:lo + batch_size], training=False).data)
    return np.concatenate(outs) if outs else np.zeros((0, len(CLASS_ORDER)))


def predict_regressor(model, x, batch_size=256):
    """{task: (n, steps)} predictions, dropout off, graph-free."""
    parts = {task: [] for task in model.spec.tasks}
    with no_grad():
        for lo in range(0, len(x), batch_size):
            out = model(x[lo:lo + batch_size], training=False)
            for task in parts:
                parts[task].append(out[task].data)
    return {
        task: (np.concatenate(chunks) if chunks else np.zeros((0, model.spec.horizon_steps)))
        for task, chunks in parts.items()
    }


def evaluate_classifier(model, x, y, batch_size=256):
    """(mean cross-entropy, accuracy) on a labeled window set."""
    if len(x) == 0:
        return 0.0, 0.0
    probs = predict_classifier(model, x, batch_size)
    onehot = one_hot(y, len(CLASS_ORDER))
    loss = categorical_cross_entropy(probs, onehot).item()
    acc = float(np.mean(probs.argmax(axis=1) == y))
    return loss, acc


def task_targets(t, tasks):
    """Slice an (n, steps, 6) target cube into {task: (n, steps)}."""
    return {task: t[:, :, INDICATOR_NAMES.index(task)] for task in tasks}


def evaluate_regressor(model, x, t, batch_size=256, weights=None):
    """Weighted-sum test MSE across the model's tasks."""
    if len(x) == 0:
        return 0.0
    preds = predict_regressor(model, x, batch_size)
    targets = task_targets(t, model.spec.tasks)
    total = 0.0
    for task in model.spec.tasks:
        w = 1.0 if weights is None else float(weights[task])
        total += w * float(np.mean((preds[task] - targets[task]) ** 2))
    return total


def train_ir(model, dataset, config: TrainConfig):
    """Cross-entropy + RMSProp training of an intention classifier.

    Returns (model, TrainHistory); history has one entry per completed epoch.
    """
    optimizer = _make_optimizer(model, config)
    history = TrainHistory()
    drop_rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence((config.seed, 0x6472)))
    )
    x, y = dataset.train_x, dataset.train_y
    onehot = one_hot(y, len(CLASS_ORDER))
    for epoch in range(config.epochs):
        shuffle_rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((config.seed, 0x7468, epoch)))
        )
        losses, counts = [], []
        for idx in _batches(len(x), config.batch_size, shuffle_rng):
            probs = model(x[idx], training=True, rng=drop_rng)
            loss = categorical_cross_entropy(probs, onehot[idx])
            model.zero_grad()
            backward(loss)
            optimizer.step()
            losses.append(loss.item() * len(idx))
            counts.append(len(idx))
        train_loss = float(np.sum(losses) / np.sum(counts)) if counts else 0.0
        test_loss, test_acc = evaluate_classifier(
            model, dataset.test_x, dataset.test_y, config.eval_batch_size
        )
        history.train_loss.append(train_loss)
        history.test_loss.append(test_loss)
        history.test_accuracy.append(test_acc)
        log.info("epoch %d: train %.4f test %.4f acc %.4f",
                 epoch + 1, train_loss, test_loss, test_acc)
        if config.target_accuracy is not None and test_acc >= config.target_accuracy:
            log.info("target accuracy %.3f reached; stopping early",
                     config.target_accuracy)
            break
    return model, history


def train_sp(model, dataset, config: TrainConfig):
    """Weighted-sum-of-task-MSE + Adam training of a regressor."""
    optimizer = _make_optimizer(model, config)
    history = TrainHistory()
    drop_rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence((config.seed, 0x6472)))
    )
    x = dataset.train_x
    targets = task_targets(dataset.train_t, model.spec.tasks)
    weights = config.task_weights
    for epoch in range(config.epochs):
        shuffle_rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((config.seed, 0x7468, epoch)))
        )
        losses, counts = [], []
        for idx in _batches(len(x), config.batch_size, shuffle_rng):
            outputs = model(x[idx], training=True, rng=drop_rng)
            batch_targets = {task: targets[task][idx] for task in outputs}
            loss = mtl_loss(outputs, batch_targets, weights)
            model.zero_grad()
            backward(loss)
            optimizer.step()
            losses.append(loss.item() * len(idx))
            counts.append(len(idx))
        train_loss = float(np.sum(losses) / np.sum(counts)) if counts else 0.0
        test_loss = evaluate_regressor(
            model, dataset.test_x, dataset.test_t, config.eval_batch_size, weights
        )
        history.train_loss.append(train_loss)
        history.test_loss.append(test_loss)
        history.test_accuracy.append(None)
        log.info("epoch %d: train %.5f test %.5f", epoch + 1, train_loss, test_loss)
    return model, history
