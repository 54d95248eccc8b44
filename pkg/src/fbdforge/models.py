"""Per-design-step next-symbol predictors.

Two backends share one interface: a count model (exact empirical
conditionals, rational arithmetic) and a single-layer LSTM over learned
symbol embeddings with a softmax head, trained by plain mini-batch
gradient descent on cross-entropy. Training is deterministic given the
spec's init seed; every run records an (epoch, batch) -> loss surface.
"""

import hashlib
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import Corpus, DesignStep, UnknownSymbolError, Vocabulary
from .stats import SymbolDistribution

__all__ = [
    "TransitionDataset",
    "ActionModelSpec",
    "ActionModel",
    "ErrorSurface",
    "slice_transitions",
    "train",
    "predict",
    "gradient_check",
    "export_error_surface",
    "prior_model",
    "dump_model",
    "load_model",
    "vocabulary_hash",
]


@dataclass(frozen=True)
class TransitionDataset:
    """(prefix, next-symbol) pairs sliced at one design step."""

    step: DesignStep
    items: tuple[tuple[tuple[str, ...], str], ...]
    vocabulary: Vocabulary | None = None
    source: str = "corpus"  # "corpus" | "fiona-context"
    weight: float = 1.0

    def __post_init__(self):
        items = tuple((tuple(prefix), target) for prefix, target in self.items)
        for prefix, _ in items:
            if len(prefix) != self.step.t:
                raise ValueError(
                    f"prefix {list(prefix)!r} has length {len(prefix)}, "
                    f"expected {self.step.t}"
                )
        if self.weight <= 0:
            raise ValueError("weight must be positive")
        if self.vocabulary is not None:
            for prefix, target in items:
                for name in prefix:
                    self.vocabulary.require(name)
                self.vocabulary.require(target)
        object.__setattr__(self, "items", items)

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class ActionModelSpec:
    backend: str = "count"  # "count" | "rnn"
    hidden_size: int = 50
    embedding_dim: int = 16
    epochs: int = 50
    learning_rate: float = 0.05
    batch_size: int = 16
    init_seed: int = 0
    context_weight: float = 0.5

    def __post_init__(self):
        if self.backend not in ("count", "rnn"):
            raise ValueError(f"unknown backend: {self.backend!r}")
        for name in ("hidden_size", "embedding_dim", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.learning_rate <= 0 or self.context_weight <= 0:
            raise ValueError("rates and weights must be positive")


@dataclass(frozen=True)
class ErrorSurface:
    """Loss grid recorded during training: one point per (epoch, batch)."""

    grid: tuple[tuple[int, int, float], ...]
    step: int
    backend: str
    pretrained: bool
    seed: int

    def __post_init__(self):
        epochs = sorted({e for e, _, _ in self.grid})
        if epochs and epochs != list(range(1, epochs[-1] + 1)):
            raise ValueError("epochs must be contiguous from 1")
        for _, _, loss in self.grid:
            if not math.isfinite(loss) or loss < 0:
                raise ValueError(f"loss must be finite and nonnegative: {loss}")

    def epoch_means(self) -> dict[int, float]:
        sums: dict[int, list[float]] = {}
        for epoch, _, loss in self.grid:
            sums.setdefault(epoch, []).append(loss)
        return {e: sum(v) / len(v) for e, v in sums.items()}

    def final_epoch_mean(self) -> float:
        means = self.epoch_means()
        return means[max(means)]


class _LstmParams:
    """Flat bag of network arrays; gate layout is [input, forget, cell, output]."""

    NAMES = ("emb", "w_x", "w_h", "b", "w_out", "b_out")

    def __init__(self, emb, w_x, w_h, b, w_out, b_out):
        self.emb = emb
        self.w_x = w_x
        self.w_h = w_h
        self.b = b
        self.w_out = w_out
        self.b_out = b_out

    @classmethod
    def init(cls, vocab_size: int, spec: ActionModelSpec) -> "_LstmParams":
        rng = np.random.default_rng(spec.init_seed)
        h, d = spec.hidden_size, spec.embedding_dim
        emb = rng.standard_normal((vocab_size, d))
        w_x = rng.standard_normal((4 * h, d)) / math.sqrt(d)
        w_h = rng.standard_normal((4 * h, h)) / math.sqrt(h)
        b = np.zeros(4 * h)
        b[h : 2 * h] = 1.0  # open forget gates at the start
        w_out = rng.standard_normal((vocab_size, h))
        b_out = np.zeros(vocab_size)
        return cls(emb, w_x, w_h, b, w_out, b_out)

    def arrays(self):
        return [getattr(self, name) for name in self.NAMES]

    def copy(self) -> "_LstmParams":
        return _LstmParams(*(a.copy() for a in self.arrays()))

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def set_flat(self, vec: np.ndarray) -> None:
        offset = 0
        for a in self.arrays():
            a.flat[:] = vec[offset : offset + a.size]
            offset += a.size


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _forward(params: _LstmParams, x_ids: np.ndarray):
    """Run the recurrence over a (B, T) index batch; returns logits and
    the per-step caches needed for backprop."""
    h_size = params.w_h.shape[1]
    batch = x_ids.shape[0]
    h = np.zeros((batch, h_size))
    c = np.zeros((batch, h_size))
    caches = []
    for tau in range(x_ids.shape[1]):
        x = params.emb[x_ids[:, tau]]
        z = x @ params.w_x.T + h @ params.w_h.T + params.b
        gi = _sigmoid(z[:, :h_size])
        gf = _sigmoid(z[:, h_size : 2 * h_size])
        gg = np.tanh(z[:, 2 * h_size : 3 * h_size])
        go = _sigmoid(z[:, 3 * h_size :])
        c_new = gf * c + gi * gg
        h_new = go * np.tanh(c_new)
        caches.append((x, h, c, gi, gf, gg, go, c_new))
        h, c = h_new, c_new
    logits = h @ params.w_out.T + params.b_out
    return logits, h, caches


def _batch_loss_and_grads(params, x_ids, y_ids, weights, want_grads=True):
    """Weighted mean cross-entropy over one batch, with gradients for
    every parameter (backprop through time)."""
    batch = x_ids.shape[0]
    logits, h_last, caches = _forward(params, x_ids)
    logp = _log_softmax(logits)
    nll = -logp[np.arange(batch), y_ids]
    loss = float((weights * nll).sum() / batch)
    if not want_grads:
        return loss, None

    probs = np.exp(logp)
    dlogits = probs
    dlogits[np.arange(batch), y_ids] -= 1.0
    dlogits *= (weights / batch)[:, None]

    grads = _LstmParams(*(np.zeros_like(a) for a in params.arrays()))
    grads.w_out += dlogits.T @ h_last
    grads.b_out += dlogits.sum(axis=0)
    dh = dlogits @ params.w_out
    h_size = params.w_h.shape[1]
    dc = np.zeros_like(dh)
    for tau in range(x_ids.shape[1] - 1, -1, -1):
        x, h_prev, c_prev, gi, gf, gg, go, c_new = caches[tau]
        tanh_c = np.tanh(c_new)
        do = dh * tanh_c
        dc = dc + dh * go * (1.0 - tanh_c**2)
        di = dc * gg
        df = dc * c_prev
        dg = dc * gi
        da = np.concatenate(
            [
                di * gi * (1.0 - gi),
                df * gf * (1.0 - gf),
                dg * (1.0 - gg**2),
                do * go * (1.0 - go),
            ],
            axis=1,
        )
        grads.w_x += da.T @ x
        grads.w_h += da.T @ h_prev
        grads.b += da.sum(axis=0)
        dx = da @ params.w_x
        np.add.at(grads.emb, x_ids[:, tau], dx)
        dh = da @ params.w_h
        dc = dc * gf
    return loss, grads


@dataclass(frozen=True)
class ActionModel:
    """A trained predictor for one design step.

    `backend` is "count", "rnn", or "prior" (the untrained fallback used
    by federations for steps without data).
    """

    spec: ActionModelSpec
    step: DesignStep
    vocabulary: Vocabulary
    backend: str
    count_table: dict[tuple[str, ...], dict[str, Fraction]] | None = None
    rnn: _LstmParams | None = None
    prior: SymbolDistribution | None = None


def prior_model(
    prior: SymbolDistribution, step: DesignStep, vocab: Vocabulary, spec: ActionModelSpec
) -> ActionModel:
    """Fallback model that ignores the prefix and answers with the prior."""
    return ActionModel(spec, step, vocab, "prior", prior=prior)


def slice_transitions(corpus: Corpus, step: DesignStep) -> TransitionDataset:
    """One (first-t-symbols, symbol-t+1) item per program longer than t."""
    items = tuple(
        (program.symbols[: step.t], program.symbols[step.t])
        for program in corpus.programs
        if len(program) > step.t
    )
    return TransitionDataset(step, items, vocabulary=corpus.vocabulary)


def _check_vocabularies(task: TransitionDataset, context: TransitionDataset | None):
    vocab = task.vocabulary
    if vocab is None:
        raise ValueError("task dataset has no vocabulary")
    if context is not None:
        if context.step != task.step:
            raise ValueError(
                f"context step {context.step.t} != task step {task.step.t}"
            )
        if context.vocabulary is not None and context.vocabulary.names != vocab.names:
            raise ValueError("vocabulary mismatch between datasets")
    return vocab


def _count_training(spec, task_data, context_data, vocab):
    def tabulate(table, dataset, weight):
        w = Fraction(weight)
        for prefix, target in dataset.items:
            conts = table.setdefault(tuple(prefix), {})
            conts[target] = conts.get(target, Fraction(0)) + w

    def mean_nll(table, dataset):
        total = 0.0
        for prefix, target in dataset.items:
            conts = table[tuple(prefix)]
            p = conts[target] / sum(conts.values())
            total += -math.log(p)
        return total / len(dataset.items)

    def constant_surface(loss, pretrained):
        grid = tuple((epoch, 1, loss) for epoch in range(1, spec.epochs + 1))
        return ErrorSurface(grid, task_data.step.t, "count", pretrained, spec.init_seed)

    table: dict[tuple[str, ...], dict[str, Fraction]] = {}
    pretrain_surface = None
    if context_data is not None:
        tabulate(table, context_data, spec.context_weight * context_data.weight)
        pretrain_surface = constant_surface(mean_nll(table, context_data), False)
    tabulate(table, task_data, task_data.weight)
    model = ActionModel(spec, task_data.step, vocab, "count", count_table=table)
    surface = constant_surface(mean_nll(table, task_data), context_data is not None)
    return model, surface, pretrain_surface


def _encode(dataset: TransitionDataset, index: dict[str, int]):
    x_ids = np.array(
        [[index[s] for s in prefix] for prefix, _ in dataset.items], dtype=np.int64
    )
    y_ids = np.array([index[t] for _, t in dataset.items], dtype=np.int64)
    return x_ids, y_ids


def _run_epochs(params, spec, x_ids, y_ids, item_weight, phase, step_t, pretrained):
    # Each phase draws its batch order from its own seed-derived stream,
    # so a fine-tuning run shuffles identically whether or not it was
    # preceded by pretraining.
    rng = np.random.default_rng([spec.init_seed, phase])
    n = x_ids.shape[0]
    grid = []
    for epoch in range(1, spec.epochs + 1):
        order = rng.permutation(n)
        for batch_no, start in enumerate(range(0, n, spec.batch_size), start=1):
            idx = order[start : start + spec.batch_size]
            weights = np.full(len(idx), item_weight)
            loss, grads = _batch_loss_and_grads(
                params, x_ids[idx], y_ids[idx], weights
            )
            for target, grad in zip(params.arrays(), grads.arrays()):
                target -= spec.learning_rate * grad
            grid.append((epoch, batch_no, loss))
    return ErrorSurface(tuple(grid), step_t, "rnn", pretrained, spec.init_seed)


def _rnn_training(spec, task_data, context_data, vocab):
    index = {name: i for i, name in enumerate(vocab.names)}
    params = _LstmParams.init(len(vocab), spec)
    pretrain_surface = None
    if context_data is not None:
        x_ids, y_ids = _encode(context_data, index)
        pretrain_surface = _run_epochs(
            params,
            spec,
            x_ids,
            y_ids,
            spec.context_weight * context_data.weight,
            0,
            task_data.step.t,
            False,
        )
    x_ids, y_ids = _encode(task_data, index)
    surface = _run_epochs(
        params,
        spec,
        x_ids,
        y_ids,
        task_data.weight,
        1,
        task_data.step.t,
        context_data is not None,
    )
    model = ActionModel(spec, task_data.step, vocab, "rnn", rnn=params)
    return model, surface, pretrain_surface


def train(
    spec: ActionModelSpec,
    task_data: TransitionDataset,
    context_data: TransitionDataset | None = None,
) -> tuple[ActionModel, ErrorSurface, ErrorSurface | None]:
    """Fit one step model.

    With context data, the recurrent backend first runs the full epoch
    budget on the (down-weighted) synthetic transitions, then fine-tunes
    on the task transitions from the pretrained parameters. The count
    backend folds the weighted context counts into its table. Returns
    (model, task surface, pretraining surface or None).
    """
    if not task_data.items:
        raise ValueError("task dataset is empty")
    vocab = _check_vocabularies(task_data, context_data)
    if spec.backend == "count":
        return _count_training(spec, task_data, context_data, vocab)
    return _rnn_training(spec, task_data, context_data, vocab)


def predict(model: ActionModel, prefix) -> SymbolDistribution:
    """Distribution over the full vocabulary for the next symbol."""
    prefix = tuple(prefix)
    if len(prefix) != model.step.t:
        raise ValueError(
            f"prefix length {len(prefix)} != model step {model.step.t}"
        )
    for name in prefix:
        model.vocabulary.require(name)

    if model.backend == "prior":
        return model.prior
    if model.backend == "count":
        conts = model.count_table.get(prefix)
        if not conts:
            share = Fraction(1, len(model.vocabulary))
            return SymbolDistribution({n: share for n in model.vocabulary.names})
        total = sum(conts.values())
        return SymbolDistribution(
            {n: conts.get(n, Fraction(0)) / total for n in model.vocabulary.names}
        )

    index = {name: i for i, name in enumerate(model.vocabulary.names)}
    x_ids = np.array([[index[s] for s in prefix]], dtype=np.int64)
    logits, _, _ = _forward(model.rnn, x_ids)
    probs = np.exp(_log_softmax(logits))[0]
    probs = probs / probs.sum()
    return SymbolDistribution(
        {name: float(probs[i]) for name, i in index.items()}
    )


def gradient_check(
    spec: ActionModelSpec, sample: TransitionDataset, epsilon: float
) -> float:
    """Max relative error between analytic and central-difference
    gradients over every parameter, on a tiny sample."""
    if spec.backend == "count":
        raise ValueError("count backend has no gradients")
    if epsilon <= 0:
        raise ValueError("invalid perturbation: epsilon must be positive")
    if len(sample.items) > 4:
        raise ValueError("gradient check expects at most 4 items")
    vocab = sample.vocabulary
    if vocab is None:
        raise ValueError("sample dataset has no vocabulary")

    index = {name: i for i, name in enumerate(vocab.names)}
    x_ids, y_ids = _encode(sample, index)
    weights = np.full(len(sample.items), sample.weight)
    params = _LstmParams.init(len(vocab), spec)
    _, grads = _batch_loss_and_grads(params, x_ids, y_ids, weights)
    analytic = grads.flat()

    def loss_at(vec):
        probe = params.copy()
        probe.set_flat(vec)
        loss, _ = _batch_loss_and_grads(probe, x_ids, y_ids, weights, want_grads=False)
        return loss

    theta = params.flat()
    worst = 0.0
    for j in range(theta.size):
        orig = theta[j]
        theta[j] = orig + epsilon
        hi = loss_at(theta)
        theta[j] = orig - epsilon
        lo = loss_at(theta)
        theta[j] = orig
        numeric = (hi - lo) / (2.0 * epsilon)
        denom = max(abs(analytic[j]), abs(numeric), 1e-8)
        worst = max(worst, abs(analytic[j] - numeric) / denom)
    return worst


def export_error_surface(surface: ErrorSurface) -> bytes:
    """CSV with metadata comment lines, rows in (epoch, batch) order."""
    out = io.StringIO()
    out.write(f"#step={surface.step}\n")
    out.write(f"#backend={surface.backend}\n")
    out.write(f"#pretrained={'true' if surface.pretrained else 'false'}\n")
    out.write(f"#seed={surface.seed}\n")
    out.write("epoch,batch,loss\n")
    for epoch, batch, loss in sorted(surface.grid):
        out.write(f"{epoch},{batch},{loss!r}\n")
    return out.getvalue().encode("utf-8")


def vocabulary_hash(vocab: Vocabulary) -> str:
    joined = "".join(vocab.names)
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()


def _spec_to_dict(spec: ActionModelSpec) -> dict:
    return {
        "backend": spec.backend,
        "hidden_size": spec.hidden_size,
        "embedding_dim": spec.embedding_dim,
        "epochs": spec.epochs,
        "learning_rate": spec.learning_rate,
        "batch_size": spec.batch_size,
        "init_seed": spec.init_seed,
        "context_weight": spec.context_weight,
    }


def dump_model(model: ActionModel) -> bytes:
    doc = {
        "version": "fbdforge-model/1",
        "backend": model.backend,
        "step": model.step.t,
        "spec": _spec_to_dict(model.spec),
        "vocabulary": list(model.vocabulary.names),
        "vocabulary_hash": vocabulary_hash(model.vocabulary),
    }
    if model.backend == "count":
        doc["table"] = {
            "".join(prefix): {s: str(c) for s, c in sorted(conts.items())}
            for prefix, conts in sorted(model.count_table.items())
        }
    elif model.backend == "rnn":
        doc["parameters"] = {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in zip(_LstmParams.NAMES, model.rnn.arrays())
        }
    elif model.backend == "prior":
        doc["prior"] = {s: str(p) for s, p in sorted(model.prior.probs.items())}
    else:
        raise ValueError(f"unknown backend: {model.backend!r}")
    return (json.dumps(doc) + "\n").encode("utf-8")


def load_model(source) -> ActionModel:
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    doc = json.loads(text)
    if doc.get("version") != "fbdforge-model/1":
        raise ValueError(f"unsupported model version: {doc.get('version')!r}")
    vocab = Vocabulary.of(*doc["vocabulary"])
    spec = ActionModelSpec(**doc["spec"])
    step = DesignStep(doc["step"])
    backend = doc["backend"]
    if backend == "count":
        table = {
            tuple(key.split("")) if key else (): {
                s: Fraction(c) for s, c in conts.items()
            }
            for key, conts in doc["table"].items()
        }
        return ActionModel(spec, step, vocab, "count", count_table=table)
    if backend == "rnn":
        arrays = [
            np.array(doc["parameters"][name]["data"], dtype=np.float64).reshape(
                doc["parameters"][name]["shape"]
            )
            for name in _LstmParams.NAMES
        ]
        return ActionModel(spec, step, vocab, "rnn", rnn=_LstmParams(*arrays))
    if backend == "prior":
        prior = SymbolDistribution(
            {s: Fraction(p) for s, p in doc["prior"].items()}
        )
        return ActionModel(spec, step, vocab, "prior", prior=prior)
    raise ValueError(f"unknown backend: {backend!r}")
