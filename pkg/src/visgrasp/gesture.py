"""Distance-parameterized gesture functions and the gesture model library."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    ClassNotFound,
    DegenerateRange,
    GestureMismatch,
    IllConditioned,
    InputError,
    SchemaError,
    TooFewSamples,
)
from .geometry import SizeParams, as_cloud, object_size
from .hand import DOF_NAMES
from .registration import GATE_FRACTION, size_discrepancy, validate_gesture_entry

DEGREE = 4


@dataclass(frozen=True, eq=False)
class GestureFunction:
    """Six quartics, one row per DOF, coefficients highest power first."""

    coeffs: np.ndarray
    d_range: tuple

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (6, DEGREE + 1):
            raise InputError(f"gesture coefficients must be 6x5, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise InputError("gesture coefficients must be finite")
        d_end, d_start = (float(x) for x in self.d_range)
        if not d_end < d_start:
            raise InputError("gesture range needs d_end < d_start")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "d_range", (d_end, d_start))

    @property
    def d_end(self):
        return self.d_range[0]

    @property
    def d_start(self):
        return self.d_range[1]

    def __call__(self, d):
        return eval_gesture(self, d)

    def final_angles(self):
        return eval_gesture(self, self.d_end)

    def start_angles(self):
        return eval_gesture(self, self.d_start)


def hand_object_distance(hand, obj) -> float:
    return float(np.linalg.norm(np.asarray(hand, dtype=float) - np.asarray(obj, dtype=float)))


def fit_gesture_function(distances, angles) -> GestureFunction:
    """Per-DOF quartic least squares of angle against distance.

    ``angles`` is ``(n, 6)``.  Solved through a QR factorization of the
    Vandermonde matrix; distances stay in raw meters.
    """
    d = np.asarray(distances, dtype=float)
    a = np.asarray(angles, dtype=float)
    if a.ndim != 2 or a.shape[1] != 6 or len(a) != len(d):
        raise InputError("angles must be (n, 6) aligned with distances")
    if len(d) < DEGREE + 1:
        raise TooFewSamples(f"quartic fit needs at least 5 samples, got {len(d)}")
    if len(np.unique(d)) < DEGREE + 1:
        raise IllConditioned("quartic fit needs at least 5 distinct distances")
    q, r = np.linalg.qr(np.vander(d, DEGREE + 1))
    coeffs = solve_triangular(r, q.T @ a).T
    return GestureFunction(coeffs, (float(d.min()), float(d.max())))


def eval_gesture(f: GestureFunction, d) -> np.ndarray:
    """Angle vector at distance ``d``, holding endpoint values outside the range.

    Scalar ``d`` gives a ``(6,)`` vector, an array of distances ``(n, 6)``.
    """
    d = np.clip(np.asarray(d, dtype=float), f.d_end, f.d_start)
    powers = d[..., None] ** np.arange(DEGREE, -1, -1)
    return powers @ f.coeffs.T


def degree_of_completion(d_start, d_ongo, d_end) -> float:
    if d_start == d_end:
        raise DegenerateRange("start and end distances coincide")
    doc = (d_start - d_ongo) / (d_start - d_end) * 100.0
    return float(min(max(doc, 0.0), 100.0))


def approach_mask(distances) -> np.ndarray:
    """Frames where the hand is still approaching.

    Distances are median-smoothed over 3 frames; a frame is kept when its
    smoothed distance does not exceed any earlier kept one.
    """
    d = np.asarray(distances, dtype=float)
    n = len(d)
    smooth = np.array([np.median(d[max(i - 1, 0):min(i + 2, n)]) for i in range(n)])
    keep = np.zeros(n, dtype=bool)
    lowest = np.inf
    for i, s in enumerate(smooth):
        if s <= lowest:
            keep[i] = True
            lowest = s
    return keep


@dataclass(frozen=True, eq=False)
class GestureLibraryEntry:
    object_class: str
    size: SizeParams
    function: GestureFunction
    model_cloud: np.ndarray = None

    def __post_init__(self):
        if not self.object_class:
            raise InputError("library entry needs an object class")


@dataclass(frozen=True, eq=False)
class GestureLibrary:
    entries: tuple = field(default_factory=tuple)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def classes(self):
        return sorted({e.object_class for e in self.entries})

    def with_entry(self, entry: GestureLibraryEntry) -> "GestureLibrary":
        """New library with ``entry`` added, replacing a same-class entry of matching size."""
        kept = [e for e in self.entries
                if not (e.object_class == entry.object_class
                        and size_discrepancy(e.size, entry.size)
                        <= GATE_FRACTION * entry.size.radius)]
        return replace(self, entries=tuple(kept) + (entry,))


def library_lookup(lib: GestureLibrary, object_class, size: SizeParams, cloud=None):
    """Best registered entry of ``object_class``; raises when none qualifies."""
    if len(lib) == 0:
        raise InputError("gesture library is empty")
    candidates = [e for e in lib if e.object_class == object_class]
    if not candidates:
        raise ClassNotFound(f"no gesture entry for class {object_class!r}")
    if size is None and cloud is None:
        # nothing observed to register against: class match only
        return candidates[-1]
    if size is None:
        size = object_size(cloud)
    best, best_rmse = None, None
    worst = None
    for entry in candidates:
        gate = validate_gesture_entry(entry, cloud, size)
        if gate.ok and (best is None or gate.rmse < best_rmse):
            best, best_rmse = entry, gate.rmse
        worst = gate.rmse if worst is None else min(worst, gate.rmse)
    if best is None:
        raise GestureMismatch(
            f"no {object_class!r} entry passes registration (best rmse {worst:.4g} m)",
            rmse=worst)
    return best


# -- persistence -----------------------------------------------------------

def _cloud_filename(idx, entry):
    safe = "".join(ch if ch.isalnum() else "_" for ch in entry.object_class)
    return f"{idx:03d}_{safe}.xyz"


def save_library(lib: GestureLibrary, path):
    path = Path(path)
    cloud_dir = path.parent / f"{path.stem}_clouds"
    docs = []
    for idx, entry in enumerate(lib):
        doc = {
            "class": entry.object_class,
            "size": entry.size.to_dict(),
            "coeffs": {name: [float(c) for c in row]
                       for name, row in zip(DOF_NAMES, entry.function.coeffs)},
            "d_range": [entry.function.d_end, entry.function.d_start],
        }
        if entry.model_cloud is not None:
            cloud_dir.mkdir(parents=True, exist_ok=True)
            name = _cloud_filename(idx, entry)
            np.savetxt(cloud_dir / name, entry.model_cloud, fmt="%.17g")
            doc["cloud_ref"] = f"{cloud_dir.name}/{name}"
        docs.append(doc)
    with open(path, "w") as fh:
        json.dump({"entries": docs}, fh, indent=1)
        fh.write("\n")


def _entry_from_doc(doc, base):
    try:
        coeff_doc = doc["coeffs"]
        rows = []
        for name in DOF_NAMES:
            row = coeff_doc[name]
            if len(row) != DEGREE + 1:
                raise SchemaError(f"DOF {name!r} has {len(row)} coefficients, expected 5")
            rows.append([float(c) for c in row])
        d_range = doc["d_range"]
        if len(d_range) != 2:
            raise SchemaError("d_range needs two values")
        function = GestureFunction(np.array(rows), tuple(d_range))
        size = SizeParams.from_dict(doc["size"])
        cloud = None
        if doc.get("cloud_ref"):
            cloud = as_cloud(np.loadtxt(base / doc["cloud_ref"], ndmin=2))
        return GestureLibraryEntry(str(doc["class"]), size, function, cloud)
    except SchemaError:
        raise
    except (KeyError, TypeError, InputError) as exc:
        raise SchemaError(f"malformed library entry: {exc}") from exc


def load_library(path) -> GestureLibrary:
    path = Path(path)
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
        raise SchemaError(f"{path}: expected an object with an 'entries' list")
    base = path.parent if path.parent != Path("") else Path(os.curdir)
    return GestureLibrary(tuple(_entry_from_doc(d, base) for d in doc["entries"]))
