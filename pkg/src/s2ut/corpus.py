"""Parallel toy corpora: generation, JSONL serialization, duration subsets.

On disk a corpus is a directory holding ``corpus.jsonl`` (one example per
line: id, split, src_text, tgt_text, tgt_units as space-separated ints,
src_audio as a relative path to raw little-endian float32 samples,
duration_s, plus ``weak`` on augmented examples), ``meta.json`` with the
language-pair definition, and ``codebook/`` with the fitted quantizer.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import toylang
from .rng import RngStream
from .signal import DEFAULT_FEAT_DIM, Waveform, extract_features, render_units_to_audio, unit_signatures
from .toylang import ToyLanguageSpec
from .units import Codebook, UnitSequence, kmeans_assign, kmeans_fit, reduce_units, relabel_to_reference

SPLITS = ("train", "dev", "test")


@dataclass
class Example:
    id: str
    split: str
    src_text: str
    tgt_text: str
    tgt_units: list[int]  # reduced form
    duration_s: float
    src_audio: str = ""  # relative path, set on save
    weak: bool = False
    src_wave: Waveform | None = None

    def to_json(self) -> dict:
        d = {
            "id": self.id,
            "split": self.split,
            "src_text": self.src_text,
            "tgt_text": self.tgt_text,
            "tgt_units": " ".join(str(u) for u in self.tgt_units),
            "src_audio": self.src_audio,
            "duration_s": self.duration_s,
        }
        if self.weak:
            d["weak"] = True
        return d

    @staticmethod
    def from_json(d: dict) -> "Example":
        units = [int(u) for u in d["tgt_units"].split()] if d["tgt_units"] else []
        return Example(
            id=d["id"],
            split=d["split"],
            src_text=d["src_text"],
            tgt_text=d["tgt_text"],
            tgt_units=units,
            duration_s=float(d["duration_s"]),
            src_audio=d["src_audio"],
            weak=bool(d.get("weak", False)),
        )


@dataclass
class Corpus:
    spec: ToyLanguageSpec
    examples: list[Example] = field(default_factory=list)
    codebook: Codebook | None = None
    root: Path | None = None

    def split(self, name: str) -> list[Example]:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return [e for e in self.examples if e.split == name]

    def validate(self) -> None:
        ids = [e.id for e in self.examples]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate example ids")
        for e in self.examples:
            if e.split not in SPLITS:
                raise ValueError(f"{e.id}: bad split {e.split!r}")
            seq = UnitSequence(self.spec.tgt_lang, e.tgt_units, form="reduced")
            assert seq.form == "reduced"
            if e.src_wave is None and not e.src_audio:
                raise ValueError(f"{e.id}: no audio attached or referenced")

    # -- audio access ------------------------------------------------------
    def wave(self, example: Example) -> Waveform:
        if example.src_wave is not None:
            return example.src_wave
        if self.root is None:
            raise ValueError("corpus has no root directory to resolve audio paths")
        raw = np.fromfile(self.root / example.src_audio, dtype="<f4")
        return Waveform(raw.astype(np.float64))

    def features(self, example: Example, feat_dim: int = DEFAULT_FEAT_DIM) -> np.ndarray:
        return extract_features(self.wave(example), feat_dim)

    # -- serialization -------------------------------------------------------
    def save(self, dir_path) -> Path:
        dir_path = Path(dir_path)
        (dir_path / "audio").mkdir(parents=True, exist_ok=True)
        self.validate()
        with open(dir_path / "corpus.jsonl", "w") as f:
            for e in self.examples:
                if not e.src_audio:
                    e.src_audio = f"audio/{e.id}.f32"
                wave = e.src_wave if e.src_wave is not None else self.wave(e)
                wave.samples.astype("<f4").tofile(dir_path / e.src_audio)
                json.dump(e.to_json(), f, sort_keys=True)
                f.write("\n")
        with open(dir_path / "meta.json", "w") as f:
            json.dump({"spec": dataclasses.asdict(self.spec)}, f, indent=1, sort_keys=True)
            f.write("\n")
        if self.codebook is not None:
            self.codebook.save(dir_path / "codebook")
        self.root = dir_path
        return dir_path

    @staticmethod
    def load(dir_path) -> "Corpus":
        dir_path = Path(dir_path)
        with open(dir_path / "meta.json") as f:
            meta = json.load(f)
        spec_dict = dict(meta["spec"])
        for key in ("src_words", "tgt_words", "length_range"):
            spec_dict[key] = tuple(spec_dict[key])
        spec = ToyLanguageSpec(**spec_dict)
        examples = []
        with open(dir_path / "corpus.jsonl") as f:
            for line in f:
                if line.strip():
                    examples.append(Example.from_json(json.loads(line)))
        codebook = None
        if (dir_path / "codebook" / "manifest.json").exists():
            codebook = Codebook.load(dir_path / "codebook")
        return Corpus(spec, examples, codebook, root=dir_path)


def fit_canonical_codebook(spec: ToyLanguageSpec, seed: int,
                           feat_dim: int = DEFAULT_FEAT_DIM) -> Codebook:
    """Quantizer whose cluster ids match the renderer's unit grid.

    Fits k-means on features of a calibration sweep covering every unit,
    then permutes cluster ids onto the per-unit tone signatures.
    """
    k = spec.k_units
    sweep = [u for u in range(k) for _ in range(3)]
    feats = extract_features(render_units_to_audio(sweep, k), feat_dim)
    fitted = kmeans_fit(feats, k, max_iters=50, rng=RngStream(seed).split("codebook"))
    return relabel_to_reference(fitted.codebook, unit_signatures(k, feat_dim))


def gen_toy_corpus(spec: ToyLanguageSpec, n_train: int, n_dev: int, n_test: int,
                   seed: int, feat_dim: int = DEFAULT_FEAT_DIM) -> Corpus:
    """Deterministic parallel corpus with rendered source audio.

    Target text is the deterministic translation of the sampled source
    sentence; target units come from rendering the target text and pushing
    the audio through the quantizer (assign + reduce). Each example draws
    from its own derived stream, so generation order never matters.
    """
    if min(n_train, n_dev, n_test) < 0:
        raise ValueError("split sizes must be >= 0")
    root_rng = RngStream(seed)
    codebook = fit_canonical_codebook(spec, seed, feat_dim)
    examples: list[Example] = []
    counts = {"train": n_train, "dev": n_dev, "test": n_test}
    for split in SPLITS:
        for i in range(counts[split]):
            ex_rng = root_rng.split("example", split, i)
            src_tokens = toylang.sample_sentence(spec, ex_rng)
            tgt_tokens = toylang.translate(spec, src_tokens)
            src_raw = toylang.sentence_to_raw_units(spec, spec.src_lang, src_tokens)
            wave = render_units_to_audio(src_raw, spec.k_units)
            tgt_raw = toylang.sentence_to_raw_units(spec, spec.tgt_lang, tgt_tokens)
            tgt_feats = extract_features(render_units_to_audio(tgt_raw, spec.k_units), feat_dim)
            tgt_units = reduce_units(kmeans_assign(tgt_feats, codebook, spec.tgt_lang))
            examples.append(
                Example(
                    id=f"{split}-{i:06d}",
                    split=split,
                    src_text=" ".join(src_tokens),
                    tgt_text=" ".join(tgt_tokens),
                    tgt_units=tgt_units.units,
                    duration_s=wave.duration_s,
                    src_wave=wave,
                )
            )
    corpus = Corpus(spec, examples, codebook)
    corpus.validate()
    return corpus


def sample_duration_subset(corpus: Corpus, budget_seconds: float, seed: int) -> Corpus:
    """Duration-budgeted subset of the train split (dev/test kept whole).

    Walks a seed-derived permutation of train examples, adding while the
    running total is below the budget, so the realized duration is the
    largest attainable at most ``budget + one example`` and larger budgets
    yield supersets under the same seed.
    """
    if budget_seconds < 0:
        raise ValueError("budget must be >= 0")
    train = corpus.split("train")
    order = RngStream(seed).split("duration-subset").permutation(len(train))
    kept: list[Example] = []
    total = 0.0
    for idx in order:
        if total >= budget_seconds:
            break
        kept.append(train[idx])
        total += train[idx].duration_s
    kept_ids = {e.id for e in kept}
    examples = [e for e in corpus.examples if e.split != "train" or e.id in kept_ids]
    return Corpus(corpus.spec, examples, corpus.codebook, root=corpus.root)
