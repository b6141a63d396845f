"""Sample schema, JSON-lines persistence, 70/30 splitting and CSV ingestion."""

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .array_channel import downsample_power, optimal_beam_power
from .errors import ColumnMissing, ParseError, SchemaError, TooFewSamples

FIELDS = ("sample_id", "scenario", "gps", "boxes", "true_tx_row", "power32", "beam")
NUM_BEAMS = 32
EARTH_RADIUS = 6_371_000.0


@dataclass(eq=False)
class SceneSample:
    sample_id: object
    scenario: str
    gps: tuple  # local east/north metres
    boxes: np.ndarray  # (N, 2) normalized box centres
    true_tx_row: object  # int or None
    power32: np.ndarray
    beam: int

    def __post_init__(self):
        self.boxes = np.asarray(self.boxes, dtype=float).reshape(-1, 2)
        self.power32 = np.asarray(self.power32, dtype=float)
        if not 0 <= self.beam < len(self.power32):
            raise SchemaError(f"beam {self.beam} outside [0, {len(self.power32)})")
        if self.true_tx_row is not None and not 0 <= self.true_tx_row < len(self.boxes):
            raise SchemaError(f"true_tx_row {self.true_tx_row} outside [0, {len(self.boxes)})")

    @property
    def tx_center(self):
        """Centre of the labelled transmitter box, or None if it was not detected."""
        if self.true_tx_row is None:
            return None
        return self.boxes[self.true_tx_row]

    def to_record(self):
        return {
            "sample_id": self.sample_id,
            "scenario": self.scenario,
            "gps": [float(self.gps[0]), float(self.gps[1])],
            "boxes": [[float(x), float(y)] for x, y in self.boxes],
            "true_tx_row": self.true_tx_row,
            "power32": [float(p) for p in self.power32],
            "beam": int(self.beam),
        }

    def __eq__(self, other):
        if not isinstance(other, SceneSample):
            return NotImplemented
        return self.to_record() == other.to_record()


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.70
    shuffle_seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")


def dumps(sample):
    # json writes floats via repr(): shortest decimal that round-trips exactly.
    return json.dumps(sample.to_record(), ensure_ascii=False, allow_nan=False)


def save(samples, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            fh.write(dumps(s))
            fh.write("\n")


def _from_record(rec, line):
    missing = [f for f in FIELDS if f not in rec]
    if missing:
        raise SchemaError(f"missing field(s) {', '.join(missing)}", line)
    gps = rec["gps"]
    if not isinstance(gps, list) or len(gps) != 2:
        raise SchemaError("gps must have 2 values", line)
    power = rec["power32"]
    if not isinstance(power, list) or len(power) != NUM_BEAMS:
        n = len(power) if isinstance(power, list) else "non-list"
        raise SchemaError(f"power32 must have {NUM_BEAMS} values, got {n}", line)
    boxes = rec["boxes"]
    if not isinstance(boxes, list) or any(not isinstance(b, list) or len(b) != 2 for b in boxes):
        raise SchemaError("boxes must be a list of [cx, cy] pairs", line)
    beam = rec["beam"]
    if not isinstance(beam, int):
        raise SchemaError("beam must be an integer", line)
    try:
        return SceneSample(
            sample_id=rec["sample_id"],
            scenario=rec["scenario"],
            gps=(float(gps[0]), float(gps[1])),
            boxes=np.array(boxes, dtype=float).reshape(-1, 2),
            true_tx_row=rec["true_tx_row"],
            power32=np.array(power, dtype=float),
            beam=beam,
        )
    except SchemaError as exc:
        raise SchemaError(str(exc), line) from None
    except (TypeError, ValueError) as exc:
        raise SchemaError(str(exc), line) from None


def load(path):
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                rec = json.loads(text)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"malformed record: {exc.msg}", lineno) from None
            if not isinstance(rec, dict):
                raise SchemaError("record is not an object", lineno)
            samples.append(_from_record(rec, lineno))
    return samples


def split(samples, spec=SplitSpec()):
    """Seeded shuffle; the first ceil(fraction * U) samples go to training."""
    n = len(samples)
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples to split, got {n}")
    n_train = math.ceil(round(spec.train_fraction * n, 9))
    n_train = min(max(n_train, 1), n - 1)
    order = np.random.default_rng(spec.shuffle_seed).permutation(n)
    train = [samples[i] for i in order[:n_train]]
    val = [samples[i] for i in order[n_train:]]
    return train, val


def latlon_to_local(lat, lon, lat0, lon0):
    """Local tangent-plane (east, north) metres of a point relative to an anchor."""
    north = math.radians(lat - lat0) * EARTH_RADIUS
    east = math.radians(lon - lon0) * EARTH_RADIUS * math.cos(math.radians(lat0))
    return east, north


def _power_columns(spec, header):
    if isinstance(spec, str):
        cols = [h for h in header if h.startswith(spec) and h[len(spec):].isdigit()]
        cols.sort(key=lambda h: int(h[len(spec):]))
        if not cols:
            raise ColumnMissing(f"no power columns with prefix {spec!r}")
        return cols
    return list(spec)


def ingest_csv(path, column_map):
    """Read a DeepSense-style table into :class:`SceneSample` records.

    ``column_map`` keys:

    ``gps``
        two column names, e.g. ``["lat", "lon"]``.
    ``gps_units``
        ``"latlon"`` (converted to local metres anchored at the first row) or
        ``"meters"`` (default).
    ``power``
        a column-name prefix (``"pwr_"`` matches ``pwr_0 .. pwr_63``) or an
        explicit list of 64 or 32 names.
    ``boxes``
        optional column holding ``"cx cy;cx cy"`` pairs.
    ``tx_row``
        optional column with the row (within ``boxes``) of the transmitter;
        blank means undetected.
    ``sample_id`` / ``scenario``
        optional column names; the row index and ``"ingested"`` are used otherwise.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        gps_cols = list(column_map.get("gps", ()))
        if len(gps_cols) != 2:
            raise ColumnMissing("column_map['gps'] must name two columns")
        power_cols = _power_columns(column_map.get("power", "power_"), header)
        wanted = gps_cols + power_cols
        for key in ("boxes", "tx_row", "sample_id", "scenario"):
            if column_map.get(key):
                wanted.append(column_map[key])
        for c in wanted:
            if c not in header:
                raise ColumnMissing(f"column {c!r} not found in {path}")
        if len(power_cols) not in (32, 64):
            raise ParseError(f"expected 32 or 64 power columns, got {len(power_cols)}")
        units = column_map.get("gps_units", "meters")

        samples, anchor = [], None
        for row_idx, row in enumerate(reader):
            try:
                g = (float(row[gps_cols[0]]), float(row[gps_cols[1]]))
                power = np.array([float(row[c]) for c in power_cols])
            except (TypeError, ValueError) as exc:
                raise ParseError(str(exc), row_idx) from None
            if not np.all(np.isfinite(power)) or not all(map(math.isfinite, g)):
                raise ParseError("non-finite value", row_idx)
            if units == "latlon":
                if anchor is None:
                    anchor = g
                g = latlon_to_local(g[0], g[1], anchor[0], anchor[1])
            if power.size == 64:
                power = downsample_power(power).values
            boxes = np.zeros((0, 2))
            if column_map.get("boxes"):
                try:
                    boxes = _parse_boxes(row[column_map["boxes"]])
                except ValueError as exc:
                    raise ParseError(f"bad boxes field: {exc}", row_idx) from None
            tx_row = None
            if column_map.get("tx_row") and row[column_map["tx_row"]].strip():
                try:
                    tx_row = int(row[column_map["tx_row"]])
                except ValueError as exc:
                    raise ParseError(f"bad tx_row field: {exc}", row_idx) from None
                if not 0 <= tx_row < len(boxes):
                    raise ParseError(f"tx_row {tx_row} outside the {len(boxes)} boxes", row_idx)
            sid = row[column_map["sample_id"]] if column_map.get("sample_id") else row_idx
            scen = row[column_map["scenario"]] if column_map.get("scenario") else "ingested"
            samples.append(
                SceneSample(
                    sample_id=sid,
                    scenario=scen,
                    gps=(float(g[0]), float(g[1])),
                    boxes=boxes,
                    true_tx_row=tx_row,
                    power32=power,
                    beam=optimal_beam_power(power),
                )
            )
    return samples


def _parse_boxes(text):
    text = (text or "").strip()
    if not text:
        return np.zeros((0, 2))
    pairs = []
    for chunk in text.split(";"):
        parts = chunk.split()
        if len(parts) != 2:
            raise ValueError(f"expected 'cx cy', got {chunk!r}")
        pairs.append([float(parts[0]), float(parts[1])])
    return np.array(pairs, dtype=float)
