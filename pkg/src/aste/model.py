"""Full model: encoder plus triplet parser, with weight serialization.

A ``TripletModel`` owns three parameter groups (encoder, optional
adapter, parser), turns a sentence into tag and relation distributions,
and decodes predicted triplets. Weights travel in a small versioned
binary format that also carries the configs and vocabulary, so a saved
model is self-contained.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .data import Sentence, Triplet, Vocabulary
from .encoder import EncodedSequence, Encoder, EncoderConfig
from .errors import ValidationError
from .numerics import ParamGroup, Tensor
from .parser import ParserConfig, TripletParser, decode_bio, decode_grid
from .structure import NONE, StructureConfig, augmented_distance_matrix

_MAGIC = b"ASTW"
_VERSION = 1


@dataclass
class SentenceForward:
    """Differentiable outputs of one (possibly padded) sentence pass."""

    encoded: EncodedSequence
    aspect: Tensor
    opinion: Tensor
    relations: Tensor
    content_len: int


class TripletModel:
    def __init__(self, encoder_config: EncoderConfig, parser_config: ParserConfig,
                 vocab: Vocabulary, seed: int = 0):
        if encoder_config.vocab_size != len(vocab):
            raise ValidationError("encoder vocab_size does not match the vocabulary")
        rng = np.random.default_rng(seed)
        self.encoder = Encoder(encoder_config, rng)
        self.parser = TripletParser(encoder_config.dim, parser_config, rng)
        self.vocab = vocab

    @property
    def encoder_config(self) -> EncoderConfig:
        return self.encoder.config

    @property
    def parser_config(self) -> ParserConfig:
        return self.parser.config

    def param_groups(self) -> list[ParamGroup]:
        return self.encoder.param_groups() + [self.parser.params]

    def zero_grad(self) -> None:
        for group in self.param_groups():
            group.zero_grad()

    # -- forward -----------------------------------------------------------

    def sentence_distances(self, sentence: Sentence, pad_to: int | None = None):
        structure = self.encoder_config.adapter
        if structure.kind == NONE:
            return None
        total = None if pad_to is None else pad_to + 2
        return augmented_distance_matrix(
            len(sentence), structure, heads=sentence.heads, total_len=total
        )

    def forward(self, sentence: Sentence, pad_to: int | None = None,
                drop_rng: np.random.Generator | None = None) -> SentenceForward:
        n = len(sentence)
        ids = self.vocab.encode(sentence.tokens)
        distances = self.sentence_distances(sentence, pad_to=pad_to)
        key_mask = None
        if pad_to is not None and pad_to > n:
            key_mask = np.zeros(pad_to + 2, dtype=bool)
            key_mask[:n + 2] = True
        encoded = self.encoder.encode(
            ids, distances=distances, pad_to=pad_to, key_mask=key_mask, drop_rng=drop_rng
        )
        hidden = encoded.content
        return SentenceForward(
            encoded=encoded,
            aspect=self.parser.tag_probs(hidden, "aspect"),
            opinion=self.parser.tag_probs(hidden, "opinion"),
            relations=self.parser.relation_probs(hidden),
            content_len=n,
        )

    # -- decoding ------------------------------------------------------------

    def predict(self, sentence: Sentence) -> set[Triplet]:
        """Decode the model's triplets for one sentence."""
        forward = self.forward(sentence)
        hidden = forward.encoded.content
        aspects = decode_bio(self.parser.tag(hidden, "aspect").tags)
        opinions = decode_bio(self.parser.tag(hidden, "opinion").tags)
        relation_map = self.parser.score_sentiment(hidden)
        return decode_grid(aspects, opinions, relation_map)

    def predict_corpus(self, sentences) -> list[set[Triplet]]:
        return [self.predict(s) for s in sentences]

    # -- serialization ---------------------------------------------------------

    def state_snapshot(self) -> dict[str, np.ndarray]:
        return {
            f"{group.name}/{name}": tensor.data.copy()
            for group in self.param_groups()
            for name, tensor in group.items()
        }

    def load_snapshot(self, snapshot: dict[str, np.ndarray]) -> None:
        for group in self.param_groups():
            for name, tensor in group.items():
                key = f"{group.name}/{name}"
                if key not in snapshot:
                    raise ValidationError(f"snapshot is missing {key}")
                if snapshot[key].shape != tensor.data.shape:
                    raise ValidationError(f"snapshot shape mismatch for {key}")
                tensor.data[...] = snapshot[key]

    def save(self, path) -> None:
        header = {
            "encoder": _encoder_config_dict(self.encoder_config),
            "parser": asdict(self.parser_config),
            "vocab": self.vocab.id_list(),
        }
        header_bytes = json.dumps(header, ensure_ascii=False).encode("utf-8")
        with open(path, "wb") as handle:
            handle.write(_MAGIC)
            handle.write(struct.pack("<I", _VERSION))
            handle.write(struct.pack("<I", len(header_bytes)))
            handle.write(header_bytes)
            entries = [
                (group.name, name, tensor)
                for group in self.param_groups()
                for name, tensor in group.items()
            ]
            handle.write(struct.pack("<I", len(entries)))
            for group_name, name, tensor in entries:
                _write_str(handle, group_name)
                _write_str(handle, name)
                handle.write(struct.pack("<I", tensor.data.ndim))
                for dim in tensor.data.shape:
                    handle.write(struct.pack("<I", dim))
                handle.write(np.ascontiguousarray(tensor.data, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "TripletModel":
        with open(path, "rb") as handle:
            if handle.read(4) != _MAGIC:
                raise ValidationError("not a model weight file")
            version, = struct.unpack("<I", handle.read(4))
            if version != _VERSION:
                raise ValidationError(f"unsupported weight file version {version}")
            header_len, = struct.unpack("<I", handle.read(4))
            header = json.loads(handle.read(header_len).decode("utf-8"))
            encoder_config = _encoder_config_from_dict(header["encoder"])
            parser_config = ParserConfig(**header["parser"])
            vocab = Vocabulary.from_token_list(header["vocab"])
            model = cls(encoder_config, parser_config, vocab, seed=0)
            count, = struct.unpack("<I", handle.read(4))
            snapshot: dict[str, np.ndarray] = {}
            for _ in range(count):
                group_name = _read_str(handle)
                name = _read_str(handle)
                ndim, = struct.unpack("<I", handle.read(4))
                shape = tuple(struct.unpack("<I", handle.read(4))[0] for _ in range(ndim))
                size = int(np.prod(shape)) if shape else 1
                data = np.frombuffer(handle.read(8 * size), dtype="<f8").reshape(shape)
                snapshot[f"{group_name}/{name}"] = data.astype(np.float64)
        model.load_snapshot(snapshot)
        return model


def _encoder_config_dict(config: EncoderConfig) -> dict:
    out = asdict(config)
    out["adapter"] = {"tau": config.adapter.tau, "kind": config.adapter.kind}
    return out


def _encoder_config_from_dict(raw: dict) -> EncoderConfig:
    raw = dict(raw)
    raw["adapter"] = StructureConfig(**raw["adapter"])
    return EncoderConfig(**raw)


def _write_str(handle, text: str) -> None:
    data = text.encode("utf-8")
    handle.write(struct.pack("<H", len(data)))
    handle.write(data)


def _read_str(handle) -> str:
    length, = struct.unpack("<H", handle.read(2))
    return handle.read(length).decode("utf-8")
