"""The classifier / regressor architectures: TCN, LSTM and TCN-LSTM trunks
with a softmax intention head or per-task status towers (shared-bottom
multi-task when more than one task).

Regression towers end in tanh mapped affinely onto [0, 1] so predictions
live on the same scale as min-max normalized targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import InvalidSpec, ReceptiveFieldTooSmall, ShapeMismatch, TaskMismatch
from .labeling import CLASS_ORDER
from .nn_core import (
    Dense,
    LstmLayer,
    Module,
    ResidualBlock,
    TcnConfig,
    TcnConfig as _TcnConfig,
    dropout,
    effective_span,
    mse_loss,
)
from .nn_core import tensor as T

KINDS = ("tcn", "lstm", "tcn_lstm")
RELATED_TASKS_DEFAULT = ("vx", "vy", "ay", "theta", "dtheta")
INDEPENDENT_TASKS_DEFAULT = ("ax",)


@dataclass(frozen=True)
class TaskSet:
    related: tuple = RELATED_TASKS_DEFAULT
    independent: tuple = INDEPENDENT_TASKS_DEFAULT

    def __post_init__(self):
        overlap = set(self.related) & set(self.independent)
        if overlap:
            raise InvalidSpec(f"tasks in both groups: {sorted(overlap)}")


@dataclass
class ModelSpec:
    kind: str = "tcn_lstm"
    head: str = "classifier"         # or "regressor"
    tasks: tuple = ()                # regressor task names
    mtl: bool = False
    window_length: int = 150
    input_dim: int = 54
    tcn: TcnConfig = field(default_factory=TcnConfig)
    lstm_units: int = 64
    lstm_depth: int = 2
    horizon_steps: int = 2
    tower_hidden: int = 64
    seed: int = 0

    def validate(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown kind {self.kind!r}")
        if self.head == "classifier":
            if self.tasks:
                raise InvalidSpec("classifier takes no tasks")
        elif self.head == "regressor":
            if not self.tasks:
                raise InvalidSpec("regressor needs at least one task")
            if self.mtl and len(self.tasks) < 1:
                raise InvalidSpec("mtl regressor needs tasks")
            if len(set(self.tasks)) != len(self.tasks):
                raise InvalidSpec("duplicate task names")
        else:
            raise InvalidSpec(f"unknown head {self.head!r}")
        if self.window_length < 1 or self.input_dim < 1:
            raise InvalidSpec("window_length and input_dim must be positive")

    def to_json(self):
        doc = asdict(self)
        doc["tcn"]["dilations"] = (
            list(self.tcn.dilations) if self.tcn.dilations is not None else None
        )
        doc["tasks"] = list(self.tasks)
        return doc

    @classmethod
    def from_json(cls, doc):
        doc = dict(doc)
        tcn = doc.pop("tcn", {})
        dil = tcn.get("dilations")
        tcn["dilations"] = tuple(dil) if dil is not None else None
        doc["tasks"] = tuple(doc.get("tasks", ()))
        return cls(tcn=_TcnConfig(**tcn), **doc)


class _Tower(Module):
    """One hidden ReLU layer + output layer; softmax for the classifier,
    tanh squashed onto [0, 1] for regression."""

    def __init__(self, in_dim, hidden, out_dim, kind, rng, name):
        self.hidden = Dense(in_dim, hidden, "relu", rng, f"{name}.hidden")
        self.out = Dense(hidden, out_dim, "none", rng, f"{name}.out")
        self.kind = kind

    def __call__(self, feat):
        h = self.hidden(feat)
        z = self.out(h)
        if self.kind == "classifier":
            return T.softmax(z, axis=-1)
        return T.mul(T.add(T.tanh(z), 1.0), 0.5)


class Model(Module):
    def __init__(self, spec: ModelSpec):
        spec.validate()
        self.spec = spec
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((spec.seed, 0x6D6F64)))
        )
        L = spec.window_length
        self.blocks = []
        self.lstm_layers = []
        feat_dim = spec.input_dim

        if spec.kind in ("tcn", "tcn_lstm"):
            dilations = spec.tcn.resolved_dilations(L)
            spec.tcn.dilations = tuple(dilations)
            if effective_span(spec.tcn.kernel_size, dilations, spec.tcn.n_stacks,
                              spec.tcn.convs_per_block) < L:
                raise ReceptiveFieldTooSmall(
                    f"dilations {dilations} cover "
                    f"{effective_span(spec.tcn.kernel_size, dilations, spec.tcn.n_stacks, spec.tcn.convs_per_block)}"
                    f" < window {L}"
                )
            c_in = spec.input_dim
            for s in range(spec.tcn.n_stacks):
                for d in dilations:
                    self.blocks.append(
                        ResidualBlock(
                            c_in, spec.tcn.n_filters, spec.tcn.kernel_size, d,
                            spec.tcn.dropout, spec.tcn.norm, rng,
                            f"block_s{s}_d{d}",
                        )
                    )
                    c_in = spec.tcn.n_filters
            feat_dim = spec.tcn.n_filters

        if spec.kind == "lstm":
            in_dim = spec.input_dim
            for i in range(spec.lstm_depth):
                self.lstm_layers.append(LstmLayer(in_dim, spec.lstm_units, rng, f"lstm{i}"))
                in_dim = spec.lstm_units
            feat_dim = spec.lstm_units
        elif spec.kind == "tcn_lstm":
            self.lstm_layers.append(LstmLayer(feat_dim, spec.lstm_units, rng, "lstm0"))
            feat_dim = spec.lstm_units

        self.feat_dim = feat_dim
        self.towers = {}
        if spec.head == "classifier":
            self.towers["intent"] = _Tower(
                feat_dim, spec.tower_hidden, len(CLASS_ORDER), "classifier", rng, "head"
            )
        else:
            for task in spec.tasks:
                self.towers[task] = _Tower(
                    feat_dim, spec.tower_hidden, spec.horizon_steps, "regressor",
                    rng, f"tower_{task}",
                )

    # Module.named_parameters walks lists/attrs; dict of towers needs help
    def named_parameters(self, prefix=""):
        out = super().named_parameters(prefix=prefix)
        for task, tower in self.towers.items():
            out.extend(tower.named_parameters(prefix=f"{prefix}towers.{task}."))
        return out

    def state_arrays(self):
        out = super().state_arrays()
        for task, tower in self.towers.items():
            for n, a in tower.state_arrays().items():
                out[f"towers.{task}.{n}"] = a
        return out

    def _load_buffers(self, state, prefix):
        super()._load_buffers(state, prefix)
        for task, tower in self.towers.items():
            tower._load_buffers(state, f"{prefix}towers.{task}.")

    def trunk_features(self, x, training=False, rng=None):
        x = T.as_tensor(x)
        if x.data.ndim != 3 or x.data.shape[1] != self.spec.window_length \
                or x.data.shape[2] != self.spec.input_dim:
            raise ShapeMismatch(
                f"expected (B, {self.spec.window_length}, {self.spec.input_dim}), "
                f"got {x.data.shape}"
            )
        h = x
        for block in self.blocks:
            h = block(h, training, rng)
        for layer in self.lstm_layers:
            h = layer(h)
        feat = T.time_index(h, h.data.shape[1] - 1)
        if self.lstm_layers:
            feat = dropout(feat, self.spec.tcn.dropout, training, rng)
        return feat

    def forward(self, x, training=False, rng=None):
        """Classifier -> (B, 3) probabilities; regressor -> {task: (B, steps)}."""
        feat = self.trunk_features(x, training, rng)
        if self.spec.head == "classifier":
            return self.towers["intent"](feat)
        return {task: tower(feat) for task, tower in self.towers.items()}

    def __call__(self, x, training=False, rng=None):
        return self.forward(x, training, rng)

    def describe(self):
        lines = [
            f"kind={self.spec.kind} head={self.spec.head} "
            f"window={self.spec.window_length} input_dim={self.spec.input_dim}",
        ]
        if self.blocks:
            lines.append(
                f"tcn: {len(self.blocks)} residual blocks, k={self.spec.tcn.kernel_size}, "
                f"filters={self.spec.tcn.n_filters}, dilations={self.spec.tcn.dilations}, "
                f"norm={self.spec.tcn.norm}"
            )
        if self.lstm_layers:
            lines.append(f"lstm: {len(self.lstm_layers)} layer(s) x {self.spec.lstm_units} units")
        if self.spec.head == "regressor":
            lines.append(f"towers: {', '.join(self.towers)} -> {self.spec.horizon_steps} steps")
        for name, p in self.named_parameters():
            lines.append(f"  {name}: {'x'.join(map(str, p.data.shape))}")
        lines.append(f"total parameters: {self.n_parameters()}")
        return "\n".join(lines)


def build_model(spec: ModelSpec) -> Model:
    return Model(spec)


def mtl_loss(outputs, targets, weights=None):
    """Weighted sum of per-task MSE losses (equal weights by default)."""
    if set(outputs) != set(targets):
        raise TaskMismatch(
            f"outputs {sorted(outputs)} vs targets {sorted(targets)}"
        )
    if weights is None:
        weights = {task: 1.0 for task in outputs}
    elif set(weights) != set(outputs):
        raise TaskMismatch("weights must cover exactly the output tasks")
    total = None
    for task in outputs:  # insertion order is the task order
        term = T.mul(mse_loss(outputs[task], targets[task]), float(weights[task]))
        total = term if total is None else T.add(total, term)
    return total
