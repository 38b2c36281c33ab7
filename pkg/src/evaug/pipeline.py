"""Run configuration, op composition, and the deterministic dataset walker.

Ops compose in a fixed order: spatial mask, then temporal mask (both on
the event stream), then integration.  Event-level masks must precede
integration so the frames reflect them; the order itself is not
configurable, which keeps runs reproducible.

Every byte of output is a pure function of (input bytes, config, master
seed).  Per-sample seeds derive from the master seed and the sample's
relative path, so results do not depend on traversal order or worker
count; per-slice seeds inside the temporal mask derive from the sample
seed and slice index.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

from . import core
from .core import EventStream, FrameTensor
from .errors import ConfigError, EvaugError, ValidationError
from .integrator import MstiSpec, integrate, msti_variants, slice_stream
from .spatial import (PatchGrid, spatial_saliency, ssem_filter_events,
                      ssem_filter_events_per_frame, ssem_mask)
from .temporal import SCOPE_ALL, SCOPES, build_drop_plan, temporal_saliency, tsem_filter_events

STREAM_SUFFIXES = (".evst", ".txt")
MANIFEST_NAME = "manifest.jsonl"


@dataclass(frozen=True)
class MstiSettings:
    enabled: bool = False
    n: int = 2
    m: int = 2


@dataclass(frozen=True)
class SsemSettings:
    enabled: bool = False
    r: float = 0.25
    patch_size: int = 16
    per_frame: bool = False


@dataclass(frozen=True)
class TsemSettings:
    enabled: bool = False
    p: float = 0.1
    scope: str = SCOPE_ALL
    q: float | None = None


@dataclass(frozen=True)
class AugConfig:
    """All run hyperparameters; validated on construction."""

    base_T: int = 10
    msti: MstiSettings = field(default_factory=MstiSettings)
    ssem: SsemSettings = field(default_factory=SsemSettings)
    tsem: TsemSettings = field(default_factory=TsemSettings)
    seed: int = 0
    polarity_encoding: str = core.POLARITY_PM1

    def __post_init__(self) -> None:
        if self.base_T < 1:
            raise ValidationError("base_T must be >= 1")
        if self.msti.n < 1 or self.msti.m < 1:
            raise ValidationError("msti.n and msti.m must be >= 1")
        if not (0.0 <= self.ssem.r <= 1.0):
            raise ValidationError("ssem.r must lie in [0, 1]")
        if self.ssem.patch_size < 1:
            raise ValidationError("ssem.patch_size must be >= 1")
        if not (0.0 <= self.tsem.p <= 1.0):
            raise ValidationError("tsem.p must lie in [0, 1]")
        if self.tsem.scope not in SCOPES:
            raise ValidationError(f"tsem.scope must be one of {SCOPES}")
        if self.tsem.scope != SCOPE_ALL and self.tsem.q is None:
            raise ValidationError("tsem.scope 'top' requires tsem.q")
        if self.tsem.q is not None and not (0.0 <= self.tsem.q <= 1.0):
            raise ValidationError("tsem.q must lie in [0, 1]")
        if not (0 <= self.seed <= core.MAX_TIMESTAMP):
            raise ValidationError("seed must fit in 64 unsigned bits")
        if self.polarity_encoding not in core.POLARITY_ENCODINGS:
            raise ValidationError(f"polarity_encoding must be one of "
                                  f"{core.POLARITY_ENCODINGS}")

    def enabled_ops(self) -> tuple[str, ...]:
        ops = []
        if self.ssem.enabled:
            ops.append("ssem")
        if self.tsem.enabled:
            ops.append("tsem")
        if self.msti.enabled:
            ops.append("msti")
        return tuple(ops)


# Config file: flat "key = value" lines, '#' comments.  Value parsers by key.
def _parse_bool(v: str) -> bool:
    low = v.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


_CONFIG_KEYS: dict[str, Callable[[str], object]] = {
    "base_T": int,
    "seed": int,
    "polarity_encoding": str,
    "msti.enabled": _parse_bool,
    "msti.n": int,
    "msti.m": int,
    "ssem.enabled": _parse_bool,
    "ssem.r": float,
    "ssem.patch_size": int,
    "ssem.per_frame": _parse_bool,
    "tsem.enabled": _parse_bool,
    "tsem.p": float,
    "tsem.scope": str,
    "tsem.q": float,
}


def parse_config(text: str) -> AugConfig:
    """Parse the flat key = value config format into an AugConfig."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc

    def section(cls, prefix: str):
        fields = {k.split(".", 1)[1]: v for k, v in values.items()
                  if k.startswith(prefix + ".")}
        return cls(**fields)

    top = {k: v for k, v in values.items() if "." not in k}
    try:
        return AugConfig(msti=section(MstiSettings, "msti"),
                         ssem=section(SsemSettings, "ssem"),
                         tsem=section(TsemSettings, "tsem"), **top)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> AugConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ComposeResult:
    """Outputs of one composed run over a single stream."""

    stream: EventStream | None                 # augmented stream, if an event op ran
    tensors: tuple[tuple[str, FrameTensor], ...]
    ops: tuple[str, ...]
    events_before: int
    events_after: int


def _run_op(name: str, fn: Callable):
    try:
        return fn()
    except EvaugError as exc:
        raise type(exc)(f"{name}: {exc}") from exc


def compose(stream: EventStream, config: AugConfig, sample_seed: int) -> ComposeResult:
    """Apply the enabled ops in fixed order: ssem -> tsem -> integration.

    Emits one tensor per temporal scale when multi-scale integration is
    enabled, else a single tensor at base_T; emits the augmented stream
    whenever an event-level op ran.
    """
    if not config.enabled_ops():
        raise ValidationError("no augmentation op enabled")
    before = len(stream)
    current = stream
    ops: list[str] = []

    if config.ssem.enabled:
        grid = PatchGrid(stream.width, stream.height, config.ssem.patch_size)
        if config.ssem.per_frame:
            def run_ssem(s=current):
                plan = slice_stream(s, config.base_T)
                return ssem_filter_events_per_frame(s, plan, grid, config.ssem.r)
        else:
            def run_ssem(s=current):
                mask = ssem_mask(spatial_saliency(s, grid), config.ssem.r, grid)
                return ssem_filter_events(s, mask)
        current = _run_op("ssem", run_ssem)
        ops.append("ssem")

    if config.tsem.enabled:
        def run_tsem(s=current):
            plan = slice_stream(s, config.base_T)
            drop = build_drop_plan(temporal_saliency(s, plan), config.tsem.p,
                                   scope=config.tsem.scope,
                                   top_fraction=config.tsem.q)
            return tsem_filter_events(s, plan, drop, sample_seed)
        current = _run_op("tsem", run_tsem)
        ops.append("tsem")

    if config.msti.enabled:
        spec = MstiSpec(config.base_T, config.msti.n, config.msti.m)
        result = _run_op("msti", lambda s=current: msti_variants(s, spec))
        tensors = (("short_term", result.short_term), ("base", result.base),
                   ("long_term", result.long_term))
        ops.append("msti")
    else:
        tensor = _run_op("integrate",
                         lambda s=current: integrate(s, slice_stream(s, config.base_T)))
        tensors = (("base", tensor),)
        ops.append("integrate")

    out_stream = current if (config.ssem.enabled or config.tsem.enabled) else None
    return ComposeResult(out_stream, tensors, tuple(ops), before, len(current))


def derive_sample_seed(master_seed: int, rel_path: str) -> int:
    """Per-sample seed from (master seed, relative path); traversal-order free."""
    h = hashlib.sha256()
    h.update(master_seed.to_bytes(8, "little"))
    h.update(rel_path.encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


def read_stream_file(path: Path, polarity_encoding: str = core.POLARITY_PM1) -> EventStream:
    data = path.read_bytes()
    if path.suffix == ".evst":
        return core.parse_binary_stream(data)
    return core.parse_text_stream(data, polarity_encoding)


@dataclass(frozen=True)
class SampleRecord:
    input: str
    outputs: tuple[str, ...]
    sub_seed: int
    ops: tuple[str, ...]
    events_before: int
    events_after: int


@dataclass(frozen=True)
class ErrorRecord:
    input: str
    error: str


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility record for one dataset run.

    Every listed output exists on disk and re-derives bit-identically
    from (its input, the config snapshot, the master seed).
    """

    config: dict
    master_seed: int
    seed_overridden: bool
    records: tuple[SampleRecord, ...]
    errors: tuple[ErrorRecord, ...]

    def to_jsonl(self) -> str:
        lines = [json.dumps({"kind": "run", "config": self.config,
                             "master_seed": self.master_seed,
                             "seed_overridden": self.seed_overridden},
                            sort_keys=True)]
        for rec in self.records:
            lines.append(json.dumps({"kind": "sample", **asdict(rec)}, sort_keys=True))
        for err in self.errors:
            lines.append(json.dumps({"kind": "error", **asdict(err)}, sort_keys=True))
        return "\n".join(lines) + "\n"


def load_manifest(path: str | Path) -> RunManifest:
    records: list[SampleRecord] = []
    errors: list[ErrorRecord] = []
    header: dict | None = None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        kind = obj.pop("kind")
        if kind == "run":
            header = obj
        elif kind == "sample":
            obj["outputs"] = tuple(obj["outputs"])
            obj["ops"] = tuple(obj["ops"])
            records.append(SampleRecord(**obj))
        elif kind == "error":
            errors.append(ErrorRecord(**obj))
        else:
            raise ConfigError(f"unknown manifest record kind {kind!r}")
    if header is None:
        raise ConfigError("manifest has no run header")
    return RunManifest(header["config"], header["master_seed"],
                       header["seed_overridden"], tuple(records), tuple(errors))


def _output_paths(rel: Path, result: ComposeResult) -> list[tuple[Path, bytes]]:
    stem = rel.with_suffix("")
    out: list[tuple[Path, bytes]] = []
    if result.stream is not None:
        out.append((stem.with_name(stem.name + ".aug.evst"),
                    core.write_binary_stream(result.stream)))
    for label, tensor in result.tensors:
        out.append((stem.with_name(f"{stem.name}.{label}.evfr"),
                    core.write_frame_tensor(tensor)))
    return out


def walk_dataset(input_dir: str | Path, output_dir: str | Path, config: AugConfig,
                 workers: int = 1, seed_override: int | None = None) -> RunManifest:
    """Augment every stream file under input_dir, mirroring the tree.

    Unreadable or invalid files become error records and the run
    continues; two inputs mapping to the same output path abort the run
    before any processing.  The manifest is written as
    ``<output_dir>/manifest.jsonl`` and returned.
    """
    if not config.enabled_ops():
        raise ValidationError("no augmentation op enabled")
    if workers < 1:
        raise ValidationError("workers must be >= 1")
    in_root = Path(input_dir)
    out_root = Path(output_dir)
    if not in_root.is_dir():
        raise ValidationError(f"input directory {in_root} does not exist")

    master_seed = config.seed if seed_override is None else seed_override
    if not (0 <= master_seed <= core.MAX_TIMESTAMP):
        raise ValidationError("seed must fit in 64 unsigned bits")

    inputs = sorted(p for p in in_root.rglob("*")
                    if p.is_file() and p.suffix in STREAM_SUFFIXES)
    rels = [p.relative_to(in_root) for p in inputs]
    claimed: dict[str, str] = {}
    for rel in rels:
        stem = rel.with_suffix("").as_posix()
        if stem in claimed:
            raise ValidationError(f"output collision: {rel.as_posix()} and "
                                  f"{claimed[stem]} map to the same output stem")
        claimed[stem] = rel.as_posix()

    def process(path: Path, rel: Path):
        rel_posix = rel.as_posix()
        try:
            stream = read_stream_file(path, config.polarity_encoding)
            sub_seed = derive_sample_seed(master_seed, rel_posix)
            result = compose(stream, config, sub_seed)
            written: list[str] = []
            for out_rel, payload in _output_paths(rel, result):
                target = out_root / out_rel
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_bytes(payload)
                written.append(out_rel.as_posix())
            return SampleRecord(rel_posix, tuple(written), sub_seed, result.ops,
                                result.events_before, result.events_after)
        except (EvaugError, OSError) as exc:
            return ErrorRecord(rel_posix, str(exc))

    out_root.mkdir(parents=True, exist_ok=True)
    if workers == 1:
        outcomes = [process(p, r) for p, r in zip(inputs, rels)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(process, inputs, rels))

    records = tuple(sorted((o for o in outcomes if isinstance(o, SampleRecord)),
                           key=lambda r: r.input))
    errors = tuple(sorted((o for o in outcomes if isinstance(o, ErrorRecord)),
                          key=lambda e: e.input))
    manifest = RunManifest(asdict(config), master_seed, seed_override is not None,
                           records, errors)
    (out_root / MANIFEST_NAME).write_text(manifest.to_jsonl(), encoding="utf-8")
    return manifest


__all__ = [
    "AugConfig", "MstiSettings", "SsemSettings", "TsemSettings",
    "ComposeResult", "SampleRecord", "ErrorRecord", "RunManifest",
    "parse_config", "load_config", "compose", "derive_sample_seed",
    "read_stream_file", "walk_dataset", "load_manifest", "MANIFEST_NAME",
]
