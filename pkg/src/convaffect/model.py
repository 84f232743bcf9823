"""Two-level bidirectional GRU classifier over dialogues.

Lower level: a biGRU reads each utterance's fused per-token inputs, a
max-pool over time compresses the valid positions, and a tanh projection
yields a 300-d utterance encoding. Upper level: a biGRU reads the sequence
of (encoding ‖ utterance feature) vectors across the whole dialogue, and an
affine head maps each position to 8 class logits. The dialogue is the
batch; no padding exists at the upper level.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .corpus import NUM_CLASSES, Dialogue
from .embed import FeatureStore, WordEmbeddingTable, fuse_utterance_inputs, fuse_word_inputs
from .errors import DimensionError
from .numkit import Tensor, gru_sequence, ops


@dataclass
class GRUCellParams:
    """One direction's gate parameters: W* act on the input, U* on the
    previous hidden state, b* are biases."""

    Wz: Tensor
    Uz: Tensor
    bz: Tensor
    Wr: Tensor
    Ur: Tensor
    br: Tensor
    Wh: Tensor
    Uh: Tensor
    bh: Tensor

    @classmethod
    def init(cls, d_in: int, d_h: int, rng: np.random.Generator) -> "GRUCellParams":
        bound = 1.0 / np.sqrt(d_h)

        def W() -> Tensor:
            return Tensor(rng.uniform(-bound, bound, size=(d_h, d_in)), requires_grad=True)

        def U() -> Tensor:
            return Tensor(rng.uniform(-bound, bound, size=(d_h, d_h)), requires_grad=True)

        def b() -> Tensor:
            return Tensor(np.zeros(d_h), requires_grad=True)

        return cls(Wz=W(), Uz=U(), bz=b(), Wr=W(), Ur=U(), br=b(), Wh=W(), Uh=U(), bh=b())

    def named(self, prefix: str):
        for f in fields(self):
            yield f"{prefix}.{f.name}", getattr(self, f.name)

    @property
    def d_h(self) -> int:
        return self.bz.data.shape[0]

    @property
    def d_in(self) -> int:
        return self.Wz.data.shape[1]


@dataclass
class ModelParams:
    """All trainable state, including the word-embedding table."""

    embedding: WordEmbeddingTable
    lower_fwd: GRUCellParams
    lower_bwd: GRUCellParams
    proj_W: Tensor
    proj_b: Tensor
    upper_fwd: GRUCellParams
    upper_bwd: GRUCellParams
    head_W: Tensor
    head_b: Tensor

    @classmethod
    def init(
        cls,
        embedding: WordEmbeddingTable,
        word_feature_dim: int,
        utterance_feature_dim: int,
        hidden: int,
        rng: np.random.Generator,
        num_classes: int = NUM_CLASSES,
    ) -> "ModelParams":
        lower_in = embedding.dim + word_feature_dim
        upper_in = hidden + utterance_feature_dim
        bound = 1.0 / np.sqrt(2 * hidden)
        return cls(
            embedding=embedding,
            lower_fwd=GRUCellParams.init(lower_in, hidden, rng),
            lower_bwd=GRUCellParams.init(lower_in, hidden, rng),
            proj_W=Tensor(rng.uniform(-bound, bound, size=(hidden, 2 * hidden)), requires_grad=True),
            proj_b=Tensor(np.zeros(hidden), requires_grad=True),
            upper_fwd=GRUCellParams.init(upper_in, hidden, rng),
            upper_bwd=GRUCellParams.init(upper_in, hidden, rng),
            head_W=Tensor(rng.uniform(-bound, bound, size=(num_classes, 2 * hidden)), requires_grad=True),
            head_b=Tensor(np.zeros(num_classes), requires_grad=True),
        )

    @property
    def hidden(self) -> int:
        return self.lower_fwd.d_h

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        """Fixed name/order contract shared by the optimizer and the
        checkpoint format."""
        out: list[tuple[str, Tensor]] = [("embedding", self.embedding.tensor)]
        out += list(self.lower_fwd.named("lower_fwd"))
        out += list(self.lower_bwd.named("lower_bwd"))
        out += [("proj_W", self.proj_W), ("proj_b", self.proj_b)]
        out += list(self.upper_fwd.named("upper_fwd"))
        out += list(self.upper_bwd.named("upper_bwd"))
        out += [("head_W", self.head_W), ("head_b", self.head_b)]
        return out

    def parameter_count(self) -> int:
        return sum(t.data.size for _, t in self.named_tensors())


@dataclass
class DialogueForwardState:
    """One dialogue's forward products: encodings for inspection, logits
    for the loss. Intermediate activations live on the graph behind them."""

    encodings: list[Tensor]
    logits: Tensor


def _one_minus(x: Tensor) -> Tensor:
    return ops.add_scalar(ops.scale(x, -1.0), 1.0)


def gru_step(p: GRUCellParams, x_t: Tensor, h_prev: Tensor) -> Tensor:
    """Single GRU step built from elementary ops.

    z = sigmoid(Wz x + Uz h + bz), r = sigmoid(Wr x + Ur h + br),
    hbar = tanh(Wh x + Uh (r*h) + bh), h' = (1-z)*h + z*hbar.

    The fused gru_sequence kernel is the production path; this composed
    form exists as its step-by-step reference.
    """
    z = ops.activate(ops.add(ops.affine(x_t, p.Wz, p.bz), ops.affine(h_prev, p.Uz)), "sigmoid")
    r = ops.activate(ops.add(ops.affine(x_t, p.Wr, p.br), ops.affine(h_prev, p.Ur)), "sigmoid")
    hb = ops.activate(
        ops.add(ops.affine(x_t, p.Wh, p.bh), ops.affine(ops.mul(r, h_prev), p.Uh)), "tanh"
    )
    return ops.add(ops.mul(_one_minus(z), h_prev), ops.mul(z, hb))


def _run_direction(p: GRUCellParams, X: Tensor) -> Tensor:
    h0 = Tensor(np.zeros(p.d_h))
    return gru_sequence(X, h0, p.Wz, p.Uz, p.bz, p.Wr, p.Ur, p.br, p.Wh, p.Uh, p.bh)


def bigru(p_fwd: GRUCellParams, p_bwd: GRUCellParams, X: Tensor, valid_len: int) -> Tensor:
    """Bidirectional GRU over the first valid_len rows of X[T, d_in].

    Both directions start from zero state. Row t of the output is
    concat(h_fwd_t, h_bwd_t); rows beyond valid_len are exactly zero, so
    padding content can never leak into the result.
    """
    T = X.data.shape[0]
    V = ops.take_rows(X, valid_len)
    Hf = _run_direction(p_fwd, V)
    Hb = ops.reverse_rows(_run_direction(p_bwd, ops.reverse_rows(V)))
    H = ops.concat_cols(Hf, Hb)
    if valid_len == T:
        return H
    return ops.pad_rows(H, T)


def encode_utterance(
    params: ModelParams,
    fused: Tensor,
    valid_len: int,
    mode: str,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Utterance encoding: dropout on the fused token rows (train mode),
    biGRU, max-pool over the valid positions, tanh projection to d_h."""
    X = ops.dropout(fused, dropout_rate, mode, rng)
    H = bigru(params.lower_fwd, params.lower_bwd, X, valid_len)
    pooled = ops.maxpool_time(H, valid_len)
    return ops.activate(ops.affine(pooled, params.proj_W, params.proj_b), "tanh")


def encode_dialogue(
    params: ModelParams,
    utt_inputs: list[Tensor],
    mode: str,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Dialogue-level logits: biGRU over the N fused utterance vectors
    (natural length, no padding), then a per-position affine head."""
    X = ops.stack_rows(utt_inputs)
    X = ops.dropout(X, dropout_rate, mode, rng)
    H = bigru(params.upper_fwd, params.upper_bwd, X, X.data.shape[0])
    return ops.affine(H, params.head_W, params.head_b)


def dialogue_forward(
    params: ModelParams,
    dialogue: Dialogue,
    store: FeatureStore,
    mode: str,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
    max_tokens: int = 50,
) -> DialogueForwardState:
    """Full forward pass over one dialogue, producing N×8 logits."""
    lower_in = params.lower_fwd.d_in
    upper_in = params.upper_fwd.d_in
    encodings: list[Tensor] = []
    utt_inputs: list[Tensor] = []
    for utt in dialogue.utterances:
        fused, valid_len = fuse_word_inputs(
            utt, params.embedding, store, dialogue.id, max_len=max_tokens
        )
        if fused.data.shape[1] != lower_in:
            raise DimensionError(
                f"fused word inputs are {fused.data.shape[1]} wide, model expects {lower_in}"
            )
        enc = encode_utterance(params, fused, valid_len, mode, dropout_rate, rng)
        utt_in = fuse_utterance_inputs(
            enc, store.utterance_vector(dialogue.id, utt.index_in_dialogue)
        )
        if utt_in.data.shape[0] != upper_in:
            raise DimensionError(
                f"fused utterance inputs are {utt_in.data.shape[0]} wide, model expects {upper_in}"
            )
        encodings.append(enc)
        utt_inputs.append(utt_in)
    logits = encode_dialogue(params, utt_inputs, mode, dropout_rate, rng)
    return DialogueForwardState(encodings=encodings, logits=logits)


def predict(
    params: ModelParams,
    dialogue: Dialogue,
    store: FeatureStore,
    max_tokens: int = 50,
) -> list[tuple[int, np.ndarray]]:
    """Per-utterance (label code, probability vector) in dialogue order.

    Inference mode: dropout off, fully deterministic.
    """
    state = dialogue_forward(params, dialogue, store, mode="infer", max_tokens=max_tokens)
    probs = ops.softmax(state.logits).data
    return [(int(row.argmax()), row) for row in probs]
