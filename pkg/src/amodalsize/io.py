"""Readers and writers for the line-oriented file formats.

Annotation files hold one JSON object per line.  Every file this package
writes starts with one ``#`` header line carrying the seed and a digest
of the effective configuration; readers skip ``#`` lines.
"""

import hashlib
import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from .boxes import BoundingBox, DetectionRecord, InstanceRecord
from .errors import InputError

RECORD_KEYS = ("image_id", "category", "modal", "amodal", "truncated", "occluded")
OPTIONAL_KEYS = ("instance", "image_w", "image_h")


def config_digest(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def header_line(kind, config, seed):
    return f"# amodalsize {kind} seed={seed} config_sha256={config_digest(config)}\n"


def _data_lines(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            yield lineno, stripped


def _box(value, where):
    if value is None:
        return None
    try:
        return BoundingBox.from_list(value)
    except (InputError, TypeError, ValueError) as exc:
        raise InputError(f"{where}: bad box {value!r} ({exc})") from None


def record_from_dict(obj, where="record"):
    missing = [k for k in ("image_id", "category", "modal") if k not in obj]
    if missing:
        raise InputError(f"{where}: missing keys {missing}")
    extra = {k: v for k, v in obj.items() if k not in RECORD_KEYS + OPTIONAL_KEYS}
    return InstanceRecord(
        image_id=str(obj["image_id"]),
        category=str(obj["category"]),
        modal=_box(obj["modal"], where),
        amodal=_box(obj.get("amodal"), where),
        truncated=bool(obj.get("truncated", False)),
        occluded=bool(obj.get("occluded", False)),
        instance=None if obj.get("instance") is None else int(obj["instance"]),
        image_w=None if obj.get("image_w") is None else float(obj["image_w"]),
        image_h=None if obj.get("image_h") is None else float(obj["image_h"]),
        extra=extra,
    )


def record_to_dict(r):
    obj = {
        "image_id": r.image_id,
        "category": r.category,
        "modal": r.modal.to_list(),
        "amodal": None if r.amodal is None else r.amodal.to_list(),
        "truncated": r.truncated,
        "occluded": r.occluded,
    }
    if r.instance is not None:
        obj["instance"] = r.instance
    if r.image_w is not None:
        obj["image_w"] = r.image_w
        obj["image_h"] = r.image_h
    for k in sorted(r.extra):
        obj[k] = r.extra[k]
    return obj


def _parse_json(lineno, line, path):
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise InputError(f"{path}:{lineno}: expected an object")
    return obj


def read_records(path):
    """Annotation records; missing ``instance`` keys are numbered per image."""
    out = []
    seen = {}
    for lineno, line in _data_lines(path):
        rec = record_from_dict(_parse_json(lineno, line, path), f"{path}:{lineno}")
        if rec.instance is None:
            rec = replace(rec, instance=seen.get(rec.image_id, 0))
        seen[rec.image_id] = seen.get(rec.image_id, 0) + 1
        out.append(rec)
    return out


def read_detections(path):
    out = []
    for lineno, line in _data_lines(path):
        obj = _parse_json(lineno, line, path)
        where = f"{path}:{lineno}"
        try:
            out.append(DetectionRecord(
                str(obj["image_id"]), str(obj["category"]), float(obj["score"]),
                _box(obj["modal"], where), _box(obj["amodal_pred"], where)))
        except KeyError as exc:
            raise InputError(f"{where}: missing key {exc}") from None
    return out


def _dump(obj):
    return json.dumps(obj, separators=(", ", ": "), allow_nan=False)


def write_records(path, records, header):
    lines = [header] + [_dump(record_to_dict(r)) + "\n" for r in records]
    _write(path, "".join(lines))


def _write(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from None


def write_text(path, text):
    _write(path, text)


def write_sidecar(path, scenes, records, header, projection="approx"):
    """Ground truth: one camera line per image, one instance line per object."""
    boxes = {(r.image_id, r.instance): r.amodal for r in records}
    lines = [header]
    for s in scenes:
        lines.append(_dump({"kind": "camera", "image_id": s.image_id, "f": s.f,
                            "h_c": s.h_c, "theta_x": s.theta_x,
                            "y_h": s.horizon(projection),
                            "image_w": s.image_w, "image_h": s.image_h}) + "\n")
        for k, o in enumerate(s.objects):
            box = boxes.get((s.image_id, k))
            lines.append(_dump({"kind": "instance", "image_id": s.image_id, "instance": k,
                                "category": o.category, "H": o.H, "d": o.d,
                                "amodal": None if box is None else box.to_list()}) + "\n")
    _write(path, "".join(lines))


def read_sidecar(path):
    """Return ``(cameras, instances)`` dicts keyed by image id / (image id, index)."""
    cameras, instances = {}, {}
    for lineno, line in _data_lines(path):
        obj = _parse_json(lineno, line, path)
        kind = obj.get("kind")
        if kind == "camera":
            cameras[str(obj["image_id"])] = obj
        elif kind == "instance":
            obj = dict(obj)
            obj["amodal"] = _box(obj.get("amodal"), f"{path}:{lineno}")
            instances[(str(obj["image_id"]), int(obj["instance"]))] = obj
        else:
            raise InputError(f"{path}:{lineno}: unknown sidecar kind {kind!r}")
    return cameras, instances


def read_init_heights(path):
    """``category height_meters`` per line."""
    out = {}
    for lineno, line in _data_lines(path):
        parts = line.split()
        try:
            name, value = " ".join(parts[:-1]), float(parts[-1])
        except (ValueError, IndexError):
            raise InputError(f"{path}:{lineno}: expected 'category height'") from None
        if not name or not (value > 0 and math.isfinite(value)):
            raise InputError(f"{path}:{lineno}: invalid init height line")
        out[name] = value
    return out


def write_init_heights(path, heights, header):
    _write(path, header + "".join(f"{c} {heights[c]!r}\n" for c in sorted(heights)))


def _literal(text):
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null", ""):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_config(text, source="config"):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise InputError(f"{source}:{lineno}: empty key")
        out[key] = _literal(value)
    return out


def read_config(path):
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def read_sensor_table(path):
    """``make model sensor_width_mm`` lines -> {(make, model): width}, lowercased."""
    out = {}
    for lineno, line in _data_lines(path):
        parts = line.split()
        if len(parts) < 3:
            raise InputError(f"{path}:{lineno}: expected 'make model sensor_width_mm'")
        try:
            width = float(parts[-1])
        except ValueError:
            raise InputError(f"{path}:{lineno}: bad sensor width {parts[-1]!r}") from None
        out[(parts[0].lower(), " ".join(parts[1:-1]).lower())] = width
    return out


def read_scores(path):
    """``image_id score_0 ... score_{n-1}`` per line."""
    ids, rows = [], []
    for lineno, line in _data_lines(path):
        parts = line.split()
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError:
            raise InputError(f"{path}:{lineno}: non-numeric score") from None
        ids.append(parts[0])
    if len({len(r) for r in rows}) > 1:
        raise InputError(f"{path}: rows have differing numbers of scores")
    return ids, rows


def read_table(path):
    """Tab-separated table with a column-name row; returns list of dicts."""
    rows = list(_data_lines(path))
    if not rows:
        raise InputError(f"{path}: empty table")
    names = rows[0][1].split("\t")
    return [dict(zip(names, line.split("\t"))) for _, line in rows[1:]]


def format_value(v):
    if v is None:
        return "NA"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_table(path, header, columns, rows):
    lines = [header, "\t".join(columns) + "\n"]
    lines += ["\t".join(format_value(v) for v in row) + "\n" for row in rows]
    _write(path, "".join(lines))
