"""Run configuration: flat `section.key = value` text files."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .learner import LEARNER_KINDS
from .scene import SceneSpec

STRATEGIES = ("random", "entropy", "lc", "bvsb", "classbal", "ssdr")
LABEL_STRATEGIES = ("dominant", "noise_aware")


def parse_kv_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    out: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if not key or not value:
            raise ConfigError(f"{path}:{lineno}: empty key or value")
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


class _KeyReader:
    def __init__(self, raw: dict[str, str], source: str):
        self.raw = dict(raw)
        self.source = source
        self.seen: set[str] = set()

    def _get(self, key, default):
        self.seen.add(key)
        return self.raw.get(key, default)

    def string(self, key, default=None, choices=None):
        val = self._get(key, default)
        if val is None:
            raise ConfigError(f"{self.source}: missing required key {key!r}")
        if choices and val not in choices:
            raise ConfigError(f"{self.source}: {key} must be one of {choices}, got {val!r}")
        return val

    def integer(self, key, default=None, minimum=None):
        val = self._get(key, default)
        if val is None:
            raise ConfigError(f"{self.source}: missing required key {key!r}")
        try:
            n = int(val)
        except (TypeError, ValueError):
            raise ConfigError(f"{self.source}: {key} must be an integer, got {val!r}") from None
        if minimum is not None and n < minimum:
            raise ConfigError(f"{self.source}: {key} must be >= {minimum}, got {n}")
        return n

    def number(self, key, default=None, low=None, high=None, exclusive_low=False):
        val = self._get(key, default)
        if val is None:
            raise ConfigError(f"{self.source}: missing required key {key!r}")
        try:
            x = float(val)
        except (TypeError, ValueError):
            raise ConfigError(f"{self.source}: {key} must be a number, got {val!r}") from None
        if low is not None and (x < low or (exclusive_low and x <= low)):
            raise ConfigError(f"{self.source}: {key} out of range, got {x}")
        if high is not None and x > high:
            raise ConfigError(f"{self.source}: {key} out of range, got {x}")
        return x

    def boolean(self, key, default):
        val = self._get(key, default)
        if isinstance(val, bool):
            return val
        if val.lower() in ("true", "1", "yes", "on"):
            return True
        if val.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{self.source}: {key} must be true or false, got {val!r}")

    def numbers(self, key, default=None):
        val = self._get(key, default)
        if val is None:
            raise ConfigError(f"{self.source}: missing required key {key!r}")
        if not isinstance(val, str):
            return tuple(val)
        try:
            return tuple(float(v) for v in val.split())
        except ValueError:
            raise ConfigError(f"{self.source}: {key} must be numbers, got {val!r}") from None

    def reject_unknown(self):
        unknown = set(self.raw) - self.seen
        if unknown:
            raise ConfigError(f"{self.source}: unknown keys {sorted(unknown)}")


@dataclass
class PartitionConfig:
    voxel_size: float = 0.5
    color_threshold: float = 0.1
    normal_threshold: float = 0.5
    min_region: int = 1
    rng_seed: int = 0


@dataclass
class GraphConfig:
    k: int = 5
    rounds: int = 1
    agg_nodes: str | int = "all"
    normalize: bool = False
    pool_factor: int = 3


@dataclass
class LearnerConfig:
    kind: str = "knn"
    k: int = 5
    rho: float = 0.9
    c_hi: float = 0.9
    seed: int = 0


@dataclass
class RunConfig:
    strategy: str
    batch: int
    budget: int
    cycles: int
    seed_fraction: float
    rng_seed: int
    output: str
    num_classes: int
    cloud_path: str | None = None
    scene_spec: SceneSpec | None = None
    target_fraction: float | None = None
    label_strategy: str = "noise_aware"
    theta: float = 0.9
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)


def parse_scene_spec(raw: dict[str, str], source: str) -> SceneSpec:
    r = _KeyReader(raw, source)
    spec = SceneSpec(
        points=r.integer("points", minimum=1),
        extent=tuple(r.numbers("extent", default=(8.0, 8.0, 3.0))),
        weights=tuple(r.numbers("weights", default=(0.8, 0.1, 0.1))),
        clutter=r.integer("clutter", default=10, minimum=0),
        sigma=r.number("sigma", default=0.01, low=0.0),
        rng_seed=r.integer("rng_seed", default=0),
        color_jitter=r.number("color_jitter", default=0.02, low=0.0),
    )
    r.seen.add("output")  # optional, consumed by the CLI
    r.reject_unknown()
    spec.validate()
    return spec


def load_scene_spec(path) -> SceneSpec:
    return parse_scene_spec(parse_kv_file(path), str(path))


def load_run_config(path) -> RunConfig:
    raw = parse_kv_file(path)
    r = _KeyReader(raw, str(path))

    strategy = r.string("run.strategy", choices=STRATEGIES)
    batch = r.integer("run.batch", minimum=1)
    cycles = r.integer("run.cycles", minimum=1)
    seed_fraction = r.number("run.seed_fraction", default="0.005")
    if not 0.0 < seed_fraction < 1.0:
        raise ConfigError(f"{path}: run.seed_fraction must be in (0, 1), got {seed_fraction}")
    rng_seed = r.integer("run.rng_seed", default="0")
    output = r.string("run.output", default="run_log.jsonl")
    if not Path(output).is_absolute():
        output = str(Path(path).parent / output)
    target_fraction = None
    if "run.target_fraction" in raw:
        target_fraction = r.number("run.target_fraction", low=0.0, high=1.0, exclusive_low=True)
    else:
        r.seen.add("run.target_fraction")

    budget = r.integer("label.budget", minimum=1)
    label_strategy = r.string("label.strategy", default="noise_aware", choices=LABEL_STRATEGIES)
    theta = r.number("label.theta", default="0.9", low=0.0, high=1.0, exclusive_low=True)

    agg_raw = r.string("graph.agg_nodes", default="all")
    agg_nodes: str | int = "all"
    if agg_raw != "all":
        try:
            agg_nodes = int(agg_raw)
        except ValueError:
            raise ConfigError(
                f"{path}: graph.agg_nodes must be 'all' or an integer, got {agg_raw!r}"
            ) from None
        if agg_nodes < 0:
            raise ConfigError(f"{path}: graph.agg_nodes must be >= 0, got {agg_nodes}")
    graph = GraphConfig(
        k=r.integer("graph.k", default="5", minimum=0),
        rounds=r.integer("graph.rounds", default="1", minimum=1),
        agg_nodes=agg_nodes,
        normalize=r.boolean("graph.normalize", default="false"),
        pool_factor=r.integer("graph.pool_factor", default="3", minimum=1),
    )

    learner = LearnerConfig(
        kind=r.string("learner.kind", default="knn", choices=LEARNER_KINDS),
        k=r.integer("learner.k", default="5", minimum=1),
        rho=r.number("learner.rho", default="0.9", low=0.0, high=1.0),
        c_hi=r.number("learner.c_hi", default="0.9", low=0.0, high=1.0),
        seed=r.integer("learner.seed", default="0"),
    )

    partition = PartitionConfig(
        voxel_size=r.number("partition.voxel_size", default="0.5", low=0.0, exclusive_low=True),
        color_threshold=r.number("partition.color_threshold", default="0.1", low=0.0),
        normal_threshold=r.number("partition.normal_threshold", default="0.5", low=0.0),
        min_region=r.integer("partition.min_region", default="1", minimum=1),
        rng_seed=r.integer("partition.rng_seed", default="0"),
    )

    base = Path(path).parent

    def resolve(p: str) -> str:
        return str(p if Path(p).is_absolute() else base / p)

    cloud_path = r._get("data.cloud", None)
    scene_path = r._get("data.scene", None)
    if (cloud_path is None) == (scene_path is None):
        raise ConfigError(f"{path}: exactly one of data.cloud or data.scene is required")
    scene_spec = None
    num_classes = None
    if cloud_path is not None:
        cloud_path = resolve(cloud_path)
    if scene_path is not None:
        scene_spec = load_scene_spec(resolve(scene_path))
        num_classes = len(scene_spec.weights)
    if "data.num_classes" in raw:
        num_classes = r.integer("data.num_classes", minimum=2)
    else:
        r.seen.add("data.num_classes")
    if num_classes is None:
        raise ConfigError(f"{path}: data.num_classes is required with data.cloud")

    r.reject_unknown()
    return RunConfig(
        strategy=strategy,
        batch=batch,
        budget=budget,
        cycles=cycles,
        seed_fraction=seed_fraction,
        rng_seed=rng_seed,
        output=output,
        num_classes=num_classes,
        cloud_path=cloud_path,
        scene_spec=scene_spec,
        target_fraction=target_fraction,
        label_strategy=label_strategy,
        theta=theta,
        partition=partition,
        graph=graph,
        learner=learner,
    )
