"""Episode, scene and report files.

Episodes are JSON documents::

    {"meta": {"episode_id", "handedness", "fps", "object_class"?, "target_id"?},
     "camera": {"fx", "fy", "px", "py", "width", "height"},
     "objects": [...],            # optional static scene, inherited by frames
     "frames": [{"t", "hand": {"wrist", "keypoints"?, "bbox"?},
                 "objects"?: [{"id", "class", "position", "bbox"?,
                               "cloud"? | "cloud_ref"?}],
                 "depth_ref"?}]}

Units are meters, degrees and seconds.  ``cloud_ref`` and ``depth_ref``
name whitespace-delimited text files relative to the episode file.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, SchemaError
from .geometry import BoundingBox2D, CameraIntrinsics, as_cloud, object_size
from .hand import as_keypoints
from .intent import SceneObject


@dataclass(frozen=True)
class EpisodeMeta:
    episode_id: str
    handedness: str = "right"
    fps: float = 30.0
    object_class: str = None
    target_id: str = None


@dataclass(frozen=True, eq=False)
class Frame:
    t: float
    wrist: np.ndarray
    objects: tuple = ()
    keypoints: np.ndarray = None
    hand_bbox: BoundingBox2D = None
    object_bboxes: dict = field(default_factory=dict)
    depth: np.ndarray = None


@dataclass(frozen=True, eq=False)
class EpisodeRecord:
    meta: EpisodeMeta
    camera: CameraIntrinsics
    frames: tuple

    @property
    def times(self):
        return np.array([f.t for f in self.frames])

    @property
    def wrists(self):
        return np.array([f.wrist for f in self.frames])

    def target_object(self):
        """The object being grasped in a modeling episode."""
        objs = self.frames[0].objects
        if self.meta.target_id is not None:
            for o in objs:
                if o.id == self.meta.target_id:
                    return o
        if self.meta.object_class is not None:
            for o in objs:
                if o.object_class == self.meta.object_class:
                    return o
        if len(objs) == 1:
            return objs[0]
        raise SchemaError(f"episode {self.meta.episode_id}: cannot tell which object is grasped")


# -- parsing helpers -------------------------------------------------------

def _vec3(value, what):
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise SchemaError(f"{what} must be 3 finite numbers")
    return arr


def _bbox(value):
    if value is None:
        return None
    if len(value) != 4:
        raise SchemaError("bbox must be [u, v, w, h]")
    return BoundingBox2D(*(float(x) for x in value))


def _object(doc, base):
    try:
        cloud = None
        if doc.get("cloud") is not None:
            cloud = as_cloud(doc["cloud"])
        elif doc.get("cloud_ref"):
            cloud = as_cloud(np.loadtxt(base / doc["cloud_ref"], ndmin=2))
        size = object_size(cloud) if cloud is not None and len(cloud) else None
        obj = SceneObject(str(doc["id"]), str(doc["class"]),
                          _vec3(doc["position"], "object position"), size, cloud)
    except KeyError as exc:
        raise SchemaError(f"object missing field {exc}") from exc
    except InputError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(str(exc)) from exc
    return obj, _bbox(doc.get("bbox"))


def _objects(docs, base):
    objs, boxes = [], {}
    for d in docs:
        obj, box = _object(d, base)
        objs.append(obj)
        if box is not None:
            boxes[obj.id] = box
    return tuple(objs), boxes


def episode_from_dict(doc, base=Path(".")) -> EpisodeRecord:
    try:
        m = doc["meta"]
        meta = EpisodeMeta(str(m["episode_id"]), m.get("handedness", "right"),
                           float(m.get("fps", 30.0)), m.get("object_class"), m.get("target_id"))
        camera = CameraIntrinsics.from_dict(doc["camera"])
        frame_docs = doc["frames"]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"episode header incomplete: {exc}") from exc
    except InputError as exc:
        raise SchemaError(str(exc)) from exc
    if meta.handedness not in ("right", "left"):
        raise SchemaError(f"unknown handedness {meta.handedness!r}")
    if not frame_docs:
        raise SchemaError("episode has no frames")

    static = _objects(doc.get("objects", []), base)
    frames = []
    last_t = -math.inf
    for i, fd in enumerate(frame_docs):
        t = float(fd["t"])
        if not t > last_t:
            raise SchemaError(f"frame {i}: timestamps must strictly increase")
        last_t = t
        hand = fd.get("hand") or {}
        if hand.get("wrist") is None:
            raise SchemaError(f"frame {i}: wrist position missing")
        wrist = _vec3(hand["wrist"], f"frame {i} wrist")
        kp = None
        if hand.get("keypoints") is not None:
            try:
                kp = as_keypoints(hand["keypoints"])
            except (InputError, ValueError) as exc:
                raise SchemaError(f"frame {i}: {exc}") from exc
        objs, boxes = _objects(fd["objects"], base) if "objects" in fd else static
        depth = None
        if fd.get("depth_ref"):
            depth = np.loadtxt(base / fd["depth_ref"], ndmin=2)
        frames.append(Frame(t, wrist, objs, kp, _bbox(hand.get("bbox")), boxes, depth))
    return EpisodeRecord(meta, camera, tuple(frames))


def load_episode(path) -> EpisodeRecord:
    path = Path(path)
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return episode_from_dict(doc, path.parent)


def _object_doc(o: SceneObject, boxes):
    d = {"id": o.id, "class": o.object_class, "position": [float(x) for x in o.position]}
    if o.id in boxes:
        d["bbox"] = boxes[o.id].as_list()
    if o.cloud is not None:
        d["cloud"] = o.cloud.tolist()
    return d


def episode_to_dict(ep: EpisodeRecord) -> dict:
    meta = {"episode_id": ep.meta.episode_id, "handedness": ep.meta.handedness,
            "fps": ep.meta.fps}
    if ep.meta.object_class is not None:
        meta["object_class"] = ep.meta.object_class
    if ep.meta.target_id is not None:
        meta["target_id"] = ep.meta.target_id
    first = ep.frames[0]
    static = all(f.objects is first.objects for f in ep.frames)
    doc = {"meta": meta, "camera": ep.camera.to_dict()}
    if static:
        doc["objects"] = [_object_doc(o, first.object_bboxes) for o in first.objects]
    frames = []
    for f in ep.frames:
        hand = {"wrist": [float(x) for x in f.wrist]}
        if f.keypoints is not None:
            hand["keypoints"] = f.keypoints.tolist()
        if f.hand_bbox is not None:
            hand["bbox"] = f.hand_bbox.as_list()
        fd = {"t": f.t, "hand": hand}
        if not static:
            fd["objects"] = [_object_doc(o, f.object_bboxes) for o in f.objects]
        frames.append(fd)
    doc["frames"] = frames
    return doc


def save_episode(ep: EpisodeRecord, path):
    with open(path, "w") as fh:
        json.dump(episode_to_dict(ep), fh)
        fh.write("\n")


# -- scenes ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SceneItem:
    id: str
    object_class: str
    position: np.ndarray
    extents: np.ndarray
    # per-DOF contact angle in degrees; inf where the finger misses the object
    contact_angles: np.ndarray


@dataclass(frozen=True, eq=False)
class SceneSpec:
    objects: tuple
    spacing: float
    seed: int = 0
    hand_start: np.ndarray = None
    stiffness: float = 1.0

    def __post_init__(self):
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise SchemaError("scene object ids must be unique")
        for a in range(len(self.objects)):
            for b in range(a + 1, len(self.objects)):
                gap = self.objects[a].position - self.objects[b].position
                # y points down, so horizontal separation lives in x and z
                if np.hypot(gap[0], gap[2]) < self.spacing - 1e-9:
                    raise SchemaError(f"objects {ids[a]} and {ids[b]} closer than the "
                                      f"{self.spacing:g} m spacing")

    def item(self, object_id):
        for o in self.objects:
            if o.id == object_id:
                return o
        return None


def _contact_list(values):
    return [None if not math.isfinite(v) else float(v) for v in values]


def scene_to_dict(scene: SceneSpec) -> dict:
    doc = {"spacing": scene.spacing, "seed": scene.seed, "stiffness": scene.stiffness,
           "objects": [{"id": o.id, "class": o.object_class,
                        "position": [float(x) for x in o.position],
                        "size": {"extents": [float(x) for x in o.extents]},
                        "contact_angles": _contact_list(o.contact_angles)}
                       for o in scene.objects]}
    if scene.hand_start is not None:
        doc["hand_start"] = [float(x) for x in scene.hand_start]
    return doc


def scene_from_dict(doc) -> SceneSpec:
    try:
        items = []
        for o in doc["objects"]:
            contact = o.get("contact_angles") or [None] * 6
            if len(contact) != 6:
                raise SchemaError("contact_angles needs one entry per DOF")
            items.append(SceneItem(
                str(o["id"]), str(o["class"]), _vec3(o["position"], "object position"),
                _vec3(o["size"]["extents"], "object extents"),
                np.array([math.inf if c is None else float(c) for c in contact])))
        start = doc.get("hand_start")
        return SceneSpec(tuple(items), float(doc["spacing"]), int(doc.get("seed", 0)),
                         None if start is None else _vec3(start, "hand_start"),
                         float(doc.get("stiffness", 1.0)))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed scene: {exc}") from exc


def load_scene(path) -> SceneSpec:
    with open(path) as fh:
        try:
            return scene_from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from exc


def save_scene(scene: SceneSpec, path):
    with open(path, "w") as fh:
        json.dump(scene_to_dict(scene), fh, indent=1)
        fh.write("\n")


# -- reports ---------------------------------------------------------------

REPORT_COLUMNS = ("trial_id", "spacing_m", "intended", "estimated", "intent_ok",
                  "success", "duration_s", "r2_mean", "rmse_mean_deg")


@dataclass(frozen=True)
class ReportRow:
    trial_id: int
    spacing_m: float
    intended: str
    estimated: str
    intent_ok: bool
    success: bool
    duration_s: float
    r2_mean: float
    rmse_mean_deg: float

    def to_trial(self):
        from .metrics import TrialRecord
        spacing = None if math.isnan(self.spacing_m) else self.spacing_m
        return TrialRecord(self.intended, self.estimated, self.success,
                           self.duration_s, spacing)


def _num(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


def _csv_cell(x):
    x = _num(x)
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def export_report(rows, path, fmt=None):
    """Write report rows as CSV or JSON (format from the suffix when omitted)."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "csv")
    if fmt == "json":
        docs = [{c: _num(getattr(r, c)) for c in REPORT_COLUMNS} for r in rows]
        text = json.dumps({"columns": list(REPORT_COLUMNS), "trials": docs}, indent=1) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in rows:
            writer.writerow([_csv_cell(getattr(r, c)) for c in REPORT_COLUMNS])
        text = buf.getvalue()
    else:
        raise InputError(f"unknown report format {fmt!r}")
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _parse_row(d):
    def f(key):
        v = d.get(key)
        return math.nan if v in (None, "") else float(v)

    def b(key):
        v = d.get(key)
        return v if isinstance(v, bool) else str(v).strip().lower() in ("1", "true")

    return ReportRow(int(d["trial_id"]), f("spacing_m"), str(d["intended"]),
                     str(d["estimated"] or ""), b("intent_ok"), b("success"),
                     f("duration_s"), f("r2_mean"), f("rmse_mean_deg"))


def load_report(path):
    path = Path(path)
    try:
        if path.suffix.lower() == ".json":
            with open(path) as fh:
                doc = json.load(fh)
            return [_parse_row(d) for d in doc["trials"]]
        with open(path, newline="") as fh:
            return [_parse_row(d) for d in csv.DictReader(fh)]
    except (KeyError, ValueError, TypeError) as exc:
        raise SchemaError(f"{path}: malformed report ({exc})") from exc


def traces_path(report_path):
    report_path = Path(report_path)
    return report_path.with_name(report_path.stem + ".traces.json")
