"""Experiment configuration: a JSON file of named blocks plus dotted overrides.

Blocks and their fields::

    scene     camera/detector/gps sub-blocks, lanes, vehicle sizes, distractors ...
    wireless  num_elements, element_spacing, fov_gamma, raw_beams,
              num_subcarriers, cyclic_prefix, sample_time, snr_db, symbol_power
    train     batch size, learning rate schedule, dropout, epochs, ... and
              train_fraction (the train/validation split)
    txid      include_bias, ridge
    eval      fractions, topk
    seeds     master

Unknown keys and invalid values raise :class:`ConfigError` whose ``path``
names the offending field, e.g. ``train.dropout``.
"""

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace

from . import array_channel as ac
from . import beamnet
from .scene import CameraModel, DetectorModel, GpsModel, SceneConfig
from .dataset import SplitSpec
from .errors import ConfigError
from .evaluation import DEFAULT_FRACTIONS, TOPK

NUM_BEAMS = 32

_SCENE_SCALARS = (
    "scenario",
    "lanes",
    "vehicle_extent",
    "vehicle_length",
    "min_gap",
    "speed",
    "max_distractors",
    "min_box_separation",
    "max_box_overlap",
    "coverage_margin",
    "carrier_hz",
    "power_noise_rel",
)
_ARRAY_KEYS = tuple(f.name for f in fields(ac.ArrayConfig))
_OFDM_KEYS = tuple(f.name for f in fields(ac.OfdmConfig))
_TRAIN_KEYS = tuple(f.name for f in fields(beamnet.TrainConfig))


@dataclass(frozen=True)
class ExperimentConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    train: beamnet.TrainConfig = field(default_factory=beamnet.TrainConfig)
    train_fraction: float = 0.70
    include_bias: bool = True
    ridge: float = 1e-8
    fractions: tuple = DEFAULT_FRACTIONS
    topk: tuple = TOPK
    seed: int = 0

    @property
    def split(self):
        return SplitSpec(self.train_fraction, shuffle_seed=self.seed)

    @property
    def train_config(self):
        """Training hyper-parameters with the master seed applied."""
        return replace(self.train, seed=self.seed)

    def to_dict(self):
        sc = self.scene
        return {
            "scene": {
                "camera": _plain(asdict(sc.camera)),
                "detector": _plain(asdict(sc.detector)),
                "gps": _plain(asdict(sc.gps)),
                **{k: _plain(getattr(sc, k)) for k in _SCENE_SCALARS},
            },
            "wireless": {
                **{k: getattr(sc.array, k) for k in _ARRAY_KEYS},
                "raw_beams": sc.raw_beams,
                **{k: getattr(sc.ofdm, k) for k in _OFDM_KEYS},
            },
            "train": {
                **{k: _plain(getattr(self.train, k)) for k in _TRAIN_KEYS if k != "seed"},
                "train_fraction": self.train_fraction,
            },
            "txid": {"include_bias": self.include_bias, "ridge": self.ridge},
            "eval": {"fractions": list(self.fractions), "topk": list(self.topk)},
            "seeds": {"master": self.seed},
        }

    def digest(self):
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v


def default_dict():
    return ExperimentConfig().to_dict()


def _merge(base, patch, path=""):
    for key, value in patch.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError("unknown field", where)
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError("expected a table of fields", where)
            _merge(base[key], value, where)
        else:
            base[key] = value


def _coerce(value, like, path):
    """Check ``value`` against the type of the default ``like``."""
    if isinstance(like, bool):
        if not isinstance(value, bool):
            raise ConfigError("expected true or false", path)
        return value
    if isinstance(like, int):
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError("expected an integer", path)
        return value
    if isinstance(like, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("expected a number", path)
        return float(value)
    if isinstance(like, str):
        if not isinstance(value, str):
            raise ConfigError("expected a string", path)
        return value
    if isinstance(like, list):
        if not isinstance(value, list):
            raise ConfigError("expected a list", path)
        if like:
            return tuple(_coerce(v, like[0], f"{path}[{i}]") for i, v in enumerate(value))
        return tuple(value)
    return value


def _typed(block, defaults, path):
    return {k: _coerce(v, defaults[k], f"{path}.{k}") for k, v in block.items()}


def _build(cls, kwargs, path):
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], f"{path}.{exc.path}" if exc.path else path)
    except (ValueError, TypeError) as exc:
        msg = str(exc)
        name = next((k for k in kwargs if msg.startswith(k)), None)
        raise ConfigError(msg, f"{path}.{name}" if name else path)


def from_dict(data):
    """Resolve a (partial) nested mapping into an :class:`ExperimentConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a table of blocks")
    d = default_dict()
    _merge(d, copy.deepcopy(data))
    defaults = default_dict()

    s, ds = d["scene"], defaults["scene"]
    camera = _build(CameraModel, _typed(s["camera"], ds["camera"], "scene.camera"), "scene.camera")
    detector = _build(
        DetectorModel, _typed(s["detector"], ds["detector"], "scene.detector"), "scene.detector"
    )
    gps = _build(GpsModel, _typed(s["gps"], ds["gps"], "scene.gps"), "scene.gps")

    w = _typed(d["wireless"], defaults["wireless"], "wireless")
    array = _build(ac.ArrayConfig, {k: w[k] for k in _ARRAY_KEYS}, "wireless")
    ofdm = _build(ac.OfdmConfig, {k: w[k] for k in _OFDM_KEYS}, "wireless")

    if w["raw_beams"] not in (NUM_BEAMS, 2 * NUM_BEAMS):
        raise ConfigError(f"must be {NUM_BEAMS} or {2 * NUM_BEAMS}", "wireless.raw_beams")
    scalars = _typed({k: s[k] for k in _SCENE_SCALARS}, ds, "scene")
    if len(scalars["vehicle_extent"]) != 2:
        raise ConfigError("expected [width, height]", "scene.vehicle_extent")
    for name in ("vehicle_length", "min_gap", "speed", "min_box_separation", "max_box_overlap"):
        if scalars[name] < 0:
            raise ConfigError("must be nonnegative", f"scene.{name}")
    sc = _build(
        SceneConfig,
        dict(
            camera=camera,
            array=array,
            ofdm=ofdm,
            detector=detector,
            gps=gps,
            raw_beams=w["raw_beams"],
            **scalars,
        ),
        "scene",
    )

    t = _typed(d["train"], defaults["train"], "train")
    train_fraction = t.pop("train_fraction")
    train = _build(beamnet.TrainConfig, t, "train")
    if train.num_classes != NUM_BEAMS:
        raise ConfigError(f"must equal the codebook size {NUM_BEAMS}", "train.num_classes")
    if not 0 < train_fraction < 1:
        raise ConfigError("must lie in (0, 1)", "train.train_fraction")

    x = _typed(d["txid"], defaults["txid"], "txid")
    if not x["ridge"] >= 0:
        raise ConfigError("must be nonnegative", "txid.ridge")

    e = _typed(d["eval"], defaults["eval"], "eval")
    fr = e["fractions"]
    if not fr or any(not 0 < f <= 1 for f in fr):
        raise ConfigError("fractions must lie in (0, 1]", "eval.fractions")
    if list(fr) != sorted(fr):
        raise ConfigError("fractions must be sorted ascending", "eval.fractions")
    if not e["topk"] or any(not 1 <= k <= NUM_BEAMS for k in e["topk"]):
        raise ConfigError(f"k values must lie in [1, {NUM_BEAMS}]", "eval.topk")

    seed = _typed(d["seeds"], defaults["seeds"], "seeds")["master"]
    if seed < 0:
        raise ConfigError("must be nonnegative", "seeds.master")

    return ExperimentConfig(
        scene=sc,
        train=train,
        train_fraction=train_fraction,
        include_bias=x["include_bias"],
        ridge=x["ridge"],
        fractions=tuple(fr),
        topk=tuple(sorted(set(e["topk"]))),
        seed=seed,
    )


def parse_override(text):
    """``"block.field=value"``; the value is JSON, falling back to a bare string."""
    if "=" not in text:
        raise ConfigError(f"expected KEY=VALUE, got {text!r}", "--set")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = patch = {}
    parts = key.strip().split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value
    return patch


def _deep_update(dst, src):
    for k, v in src.items():
        if isinstance(v, dict) and isinstance(dst.get(k), dict):
            _deep_update(dst[k], v)
        else:
            dst[k] = v


def load(path=None, overrides=()):
    """Read ``path`` (JSON) if given and apply override mappings in order."""
    data = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", "--config")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno}: {exc.msg}", "--config")
        if not isinstance(data, dict):
            raise ConfigError("config must be a table of blocks", "--config")
    for patch in overrides:
        _deep_update(data, patch)
    return from_dict(data)
