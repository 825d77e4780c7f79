"""Two-stage language identification for corpus curation.

Stage 1 is a rank-order character n-gram matcher: cheap, tolerant of
short inputs, good at separating language families.  Stage 2 is a
smoothed character n-gram log-probability classifier whose softmax
posterior doubles as a confidence score; it arbitrates the near-miss
pairs stage 1 cannot (Spanish vs. Portuguese vs. Galician).  A page is
kept only when both stages agree on the target language and stage 2 is
confident enough.

Both stages load from versioned TSV model files shipped with the
package; `rebuild_default_models` regenerates them from the bundled
seed corpora so retraining is reproducible.
"""

from __future__ import annotations

import math
import re
import subprocess
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ModelError

PROFILE_FORMAT = "warc2corpus-profile"
PROFILE_VERSION = "v1"

NGRAM_MIN = 1
NGRAM_MAX = 3
STAGE1_PROFILE_SIZE = 300
STAGE2_TABLE_SIZE = 4000
STAGE2_ALPHA = 0.1

DEFAULT_MIN_CHARS = 40
DEFAULT_MIN_CONFIDENCE = 0.8

UNKNOWN_LANG = "und"

DEFAULT_LANGS = ("ca", "de", "en", "es", "fr", "gl", "it", "pt")

_APOSTROPHES = str.maketrans({"’": "'", "`": "'", "´": "'"})
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class LanguageVerdict:
    lang: str
    confidence: float
    stage: int


def normalize_for_langid(text: str) -> str:
    """Reduce text to the letter stream the models are trained on."""
    text = unicodedata.normalize("NFC", text).lower().translate(_APOSTROPHES)
    kept = "".join(ch if ch.isalpha() or ch == "'" else " " for ch in text)
    collapsed = _WS_RE.sub(" ", kept).strip()
    return f" {collapsed} " if collapsed else ""


def char_ngrams(normalized: str, n_min: int = NGRAM_MIN, n_max: int = NGRAM_MAX) -> Counter:
    grams: Counter = Counter()
    length = len(normalized)
    for n in range(n_min, n_max + 1):
        for i in range(length - n + 1):
            grams[normalized[i : i + n]] += 1
    return grams


def _ranked_grams(counts: Counter, size: int) -> list[str]:
    # Ties broken lexically so rebuilt models are byte-stable.
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [gram for gram, _ in ordered[:size]]


# --------------------------------------------------------------------------
# Stage 1: rank-order profiles


@dataclass(frozen=True)
class RankProfile:
    lang: str
    ranks: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.ranks)


def build_rank_profile(texts: Iterable[str], lang: str, size: int = STAGE1_PROFILE_SIZE) -> RankProfile:
    counts: Counter = Counter()
    for text in texts:
        counts.update(char_ngrams(normalize_for_langid(text)))
    grams = _ranked_grams(counts, size)
    return RankProfile(lang=lang, ranks={g: i for i, g in enumerate(grams)})


def _out_of_place(doc_grams: Sequence[str], profile: RankProfile) -> int:
    penalty = profile.size
    total = 0
    for rank, gram in enumerate(doc_grams):
        model_rank = profile.ranks.get(gram)
        total += penalty if model_rank is None else abs(rank - model_rank)
    return total


class RankProfileDetector:
    """Out-of-place rank matcher over character n-gram profiles."""

    def __init__(self, profiles: Sequence[RankProfile], min_chars: int = DEFAULT_MIN_CHARS):
        if not profiles:
            raise ModelError("stage 1 needs at least one language profile")
        self.profiles = list(profiles)
        self.min_chars = min_chars

    def classify(self, text: str) -> LanguageVerdict:
        if len(text.strip()) < self.min_chars:
            return LanguageVerdict(UNKNOWN_LANG, 0.0, stage=1)
        normalized = normalize_for_langid(text)
        doc_grams = _ranked_grams(char_ngrams(normalized), STAGE1_PROFILE_SIZE)
        if not doc_grams:
            return LanguageVerdict(UNKNOWN_LANG, 0.0, stage=1)
        scored = sorted(
            ((_out_of_place(doc_grams, p), p.lang) for p in self.profiles),
            key=lambda pair: (pair[0], pair[1]),
        )
        best_dist, best_lang = scored[0]
        # Distance of a profile sharing nothing with the document.
        floor = self.profiles[0].size * len(doc_grams)
        if best_dist >= floor:
            return LanguageVerdict(UNKNOWN_LANG, 0.0, stage=1)
        confidence = 1.0 - best_dist / floor
        return LanguageVerdict(best_lang, confidence, stage=1)


# --------------------------------------------------------------------------
# Stage 2: smoothed log-probability models


@dataclass(frozen=True)
class LogProbModel:
    lang: str
    logprobs: dict[str, float]
    floor: float


def build_logprob_model(
    texts: Iterable[str],
    lang: str,
    size: int = STAGE2_TABLE_SIZE,
    alpha: float = STAGE2_ALPHA,
) -> LogProbModel:
    counts: Counter = Counter()
    for text in texts:
        counts.update(char_ngrams(normalize_for_langid(text)))
    kept = {g: counts[g] for g in _ranked_grams(counts, size)}
    total = sum(kept.values())
    vocab = len(kept) + 1  # one shared slot for every unseen gram
    denom = total + alpha * vocab
    logprobs = {g: math.log((c + alpha) / denom) for g, c in kept.items()}
    return LogProbModel(lang=lang, logprobs=logprobs, floor=math.log(alpha / denom))


class LogProbDetector:
    """Naive-Bayes style scorer; softmax over total log-likelihoods."""

    def __init__(self, models: Sequence[LogProbModel], min_chars: int = DEFAULT_MIN_CHARS):
        if not models:
            raise ModelError("stage 2 needs at least one language model")
        self.models = list(models)
        self.min_chars = min_chars

    def classify(self, text: str) -> LanguageVerdict:
        if len(text.strip()) < self.min_chars:
            return LanguageVerdict(UNKNOWN_LANG, 0.0, stage=2)
        grams = char_ngrams(normalize_for_langid(text))
        if not grams:
            return LanguageVerdict(UNKNOWN_LANG, 0.0, stage=2)
        totals = []
        for model in self.models:
            ll = sum(
                count * model.logprobs.get(gram, model.floor) for gram, count in grams.items()
            )
            totals.append((ll, model.lang))
        # Softmax over the total log-likelihoods is the posterior under
        # equal priors; confident for clear text, soft for ambiguous text.
        peak = max(ll for ll, _ in totals)
        weights = [(math.exp(ll - peak), lang) for ll, lang in totals]
        z = sum(w for w, _ in weights)
        best_w, best_lang = max(weights, key=lambda pair: (pair[0], pair[1]))
        return LanguageVerdict(best_lang, best_w / z, stage=2)


# --------------------------------------------------------------------------
# Model persistence (versioned TSV)


def _escape(gram: str) -> str:
    return gram.replace("\\", "\\\\").replace(" ", "\\s")


def _unescape(token: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(token):
        ch = token[i]
        if ch == "\\" and i + 1 < len(token):
            nxt = token[i + 1]
            out.append(" " if nxt == "s" else nxt)
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _header(kind: str, lang: str) -> str:
    return "\t".join((PROFILE_FORMAT, PROFILE_VERSION, f"kind={kind}", f"lang={lang}"))


def _parse_header(line: str, path: Path) -> tuple[str, str]:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 4 or fields[0] != PROFILE_FORMAT:
        raise ModelError(f"{path}: not a recognised model file")
    if fields[1] != PROFILE_VERSION:
        raise ModelError(f"{path}: unsupported model version {fields[1]!r}")
    kind = fields[2].removeprefix("kind=")
    lang = fields[3].removeprefix("lang=")
    if not kind or not lang or "=" in kind:
        raise ModelError(f"{path}: malformed model header")
    return kind, lang


def save_rank_profile(profile: RankProfile, path: Path) -> None:
    lines = [_header("rank", profile.lang)]
    for gram, rank in sorted(profile.ranks.items(), key=lambda kv: kv[1]):
        lines.append(f"{_escape(gram)}\t{rank}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_rank_profile(path: Path) -> RankProfile:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from exc
    if not lines:
        raise ModelError(f"{path}: empty model file")
    kind, lang = _parse_header(lines[0], path)
    if kind != "rank":
        raise ModelError(f"{path}: expected a rank profile, found {kind!r}")
    ranks: dict[str, int] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        try:
            gram, rank = line.split("\t")
            ranks[_unescape(gram)] = int(rank)
        except ValueError as exc:
            raise ModelError(f"{path}:{lineno}: malformed profile row") from exc
    if not ranks:
        raise ModelError(f"{path}: profile has no entries")
    return RankProfile(lang=lang, ranks=ranks)


def save_logprob_model(model: LogProbModel, path: Path) -> None:
    lines = [_header("logprob", model.lang), f"__floor__\t{model.floor!r}"]
    for gram, lp in sorted(model.logprobs.items()):
        lines.append(f"{_escape(gram)}\t{lp!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_logprob_model(path: Path) -> LogProbModel:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from exc
    if not lines:
        raise ModelError(f"{path}: empty model file")
    kind, lang = _parse_header(lines[0], path)
    if kind != "logprob":
        raise ModelError(f"{path}: expected a logprob model, found {kind!r}")
    floor: float | None = None
    logprobs: dict[str, float] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        try:
            gram, value = line.split("\t")
            if gram == "__floor__":
                floor = float(value)
            else:
                logprobs[_unescape(gram)] = float(value)
        except ValueError as exc:
            raise ModelError(f"{path}:{lineno}: malformed model row") from exc
    if floor is None or not logprobs:
        raise ModelError(f"{path}: model is missing entries")
    return LogProbModel(lang=lang, logprobs=logprobs, floor=floor)


# --------------------------------------------------------------------------
# Bundled models


def _package_dir(name: str) -> Path:
    return Path(str(resources.files("warc2corpus"))) / name


def seed_corpus(lang: str) -> list[str]:
    path = _package_dir("langdata") / f"{lang}.txt"
    if not path.exists():
        raise ModelError(f"no bundled seed corpus for {lang!r}")
    lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines()]
    return [ln for ln in lines if ln and not ln.startswith("#")]


def rebuild_default_models(dest: Path | None = None, langs: Sequence[str] = DEFAULT_LANGS) -> None:
    """Regenerate the shipped TSV models from the bundled seed corpora."""
    base = dest if dest is not None else _package_dir("models")
    (base / "stage1").mkdir(parents=True, exist_ok=True)
    (base / "stage2").mkdir(parents=True, exist_ok=True)
    for lang in langs:
        texts = seed_corpus(lang)
        save_rank_profile(build_rank_profile(texts, lang), base / "stage1" / f"{lang}.tsv")
        save_logprob_model(build_logprob_model(texts, lang), base / "stage2" / f"{lang}.tsv")


_DEFAULT_STAGE1: RankProfileDetector | None = None
_DEFAULT_STAGE2: LogProbDetector | None = None


def default_stage1() -> RankProfileDetector:
    global _DEFAULT_STAGE1
    if _DEFAULT_STAGE1 is None:
        base = _package_dir("models") / "stage1"
        profiles = [load_rank_profile(p) for p in sorted(base.glob("*.tsv"))]
        _DEFAULT_STAGE1 = RankProfileDetector(profiles)
    return _DEFAULT_STAGE1


def default_stage2() -> LogProbDetector:
    global _DEFAULT_STAGE2
    if _DEFAULT_STAGE2 is None:
        base = _package_dir("models") / "stage2"
        models = [load_logprob_model(p) for p in sorted(base.glob("*.tsv"))]
        _DEFAULT_STAGE2 = LogProbDetector(models)
    return _DEFAULT_STAGE2


def detect_stage1(text: str) -> LanguageVerdict:
    return default_stage1().classify(text)


def detect_stage2(text: str) -> LanguageVerdict:
    return default_stage2().classify(text)


@dataclass
class LanguageCascade:
    """Keep a page only when both stages agree and stage 2 is confident."""

    stage1: RankProfileDetector
    stage2: LogProbDetector | "SubprocessDetector"
    target: str = "es"
    min_confidence: float = DEFAULT_MIN_CONFIDENCE

    def verdict(self, text: str) -> LanguageVerdict:
        first = self.stage1.classify(text)
        if first.lang != self.target:
            return first
        return self.stage2.classify(text)

    def accepts(self, text: str) -> bool:
        first = self.stage1.classify(text)
        if first.lang != self.target:
            return False
        second = self.stage2.classify(text)
        return second.lang == self.target and second.confidence >= self.min_confidence


def default_cascade(target: str = "es", min_confidence: float = DEFAULT_MIN_CONFIDENCE) -> LanguageCascade:
    return LanguageCascade(default_stage1(), default_stage2(), target, min_confidence)


def accept_target(text: str, target: str = "es", min_confidence: float = DEFAULT_MIN_CONFIDENCE) -> bool:
    return default_cascade(target, min_confidence).accepts(text)


class SubprocessDetector:
    """Adapter for an external classifier speaking a line protocol.

    The child process reads one text per line (newlines in the text are
    flattened to spaces) and answers with ``lang<TAB>confidence``.  Lets
    the cascade swap in an off-the-shelf model without code changes.
    """

    def __init__(self, command: Sequence[str], min_chars: int = DEFAULT_MIN_CHARS):
        self.command = list(command)
        self.min_chars = min_chars
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    bufsize=1,
                )
            except OSError as exc:
                raise ModelError(f"cannot start detector {self.command!r}: {exc}") from exc
        return self._proc

    def classify(self, text: str) -> LanguageVerdict:
        if len(text.strip()) < self.min_chars:
            return LanguageVerdict(UNKNOWN_LANG, 0.0, stage=2)
        proc = self._ensure()
        flattened = " ".join(text.split())
        try:
            assert proc.stdin is not None and proc.stdout is not None
            proc.stdin.write(flattened + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (OSError, ValueError) as exc:
            raise ModelError(f"detector {self.command!r} died mid-request") from exc
        if not line:
            raise ModelError(f"detector {self.command!r} closed its output")
        try:
            lang, conf = line.rstrip("\n").split("\t")
            return LanguageVerdict(lang, float(conf), stage=2)
        except ValueError as exc:
            raise ModelError(f"detector sent malformed reply {line!r}") from exc

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            if self._proc.stdin is not None:
                self._proc.stdin.close()
            self._proc.wait(timeout=5)
        self._proc = None
