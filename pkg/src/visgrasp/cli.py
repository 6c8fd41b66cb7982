"""Command-line entry points: library building, grasp simulation, evaluation.

Exit codes: 0 success, 1 usage error, 2 data or schema error, 3 fit,
registration or controller failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import synth
from .controller import ContactModel, ControllerConfig
from .episode import (
    ReportRow,
    export_report,
    load_episode,
    load_report,
    load_scene,
    save_episode,
    save_scene,
    traces_path,
)
from .errors import ComputationError, EmptyTrials, InputError, SchemaError
from .gesture import GestureLibrary, load_library, save_library
from .intent import SceneObject
from .metrics import (
    by_spacing,
    format_mean_std,
    grasp_success_rate,
    intent_accuracy,
    mean_std,
    per_round,
)
from .simulation import (
    NO_CONTACT,
    SPHERE_RADIUS,
    TrialSettings,
    check_trial_count,
    model_episode,
    run_trial,
    simulate_scene,
    sphere_on_track,
)

log = logging.getLogger("visgrasp")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# -- build-library -----------------------------------------------------------

def cmd_build_library(args):
    folder = Path(args.episodes)
    files = sorted(folder.glob("*.json")) if folder.is_dir() else []
    if not files:
        raise InputError(f"no episodes found in {folder}")
    lib = GestureLibrary()
    results = []
    for path in files:
        ep = load_episode(path)
        if not any(f.keypoints is not None for f in ep.frames):
            log.warning("%s: no hand keypoints, skipped", path.name)
            continue
        res = model_episode(ep, seed=args.seed)
        lib = lib.with_entry(res.entry)
        results.append((path.name, res))
    if not results:
        raise InputError(f"no episodes with hand keypoints in {folder}")
    save_library(lib, args.out)

    print("episode\tclass\tsamples\tresidual_rms_deg\td_end_m\td_start_m")
    for name, res in results:
        f = res.entry.function
        print(f"{name}\t{res.entry.object_class}\t{res.n_samples}\t"
              f"{res.residual_rms:.3g}\t{f.d_end:.4f}\t{f.d_start:.4f}")
    print(f"# {len(lib)} entries written to {args.out}", file=sys.stderr)
    if args.figures:
        from .plotting import plot_library
        out = _figure_dir(args.figures) / "library.png"
        plot_library(lib, out)
        print(f"# figure {out}", file=sys.stderr)
    return EXIT_OK


# -- simulate ----------------------------------------------------------------

def _config(args):
    return ControllerConfig(handedness=args.handedness,
                            actuator_time_constant=args.time_constant)


def _episode_contacts(ep):
    contacts = {}
    for o in ep.frames[0].objects:
        if o.object_class in synth.CATALOG:
            contacts[o.id] = ContactModel(synth.contact_angles(o.object_class))
        else:
            contacts[o.id] = NO_CONTACT
    return contacts


def _simulate_episode(path, lib, cfg, trial_id):
    ep = load_episode(path)
    out = run_trial(ep, lib, cfg, _episode_contacts(ep))
    r2 = rmse = math.nan
    reference = None
    if out.final_state.entry is not None:
        reference = out.final_state.entry.function
        rep = out.anthropomorphism(reference)
        if rep is not None:
            r2, rmse = rep.r2_mean, rep.rmse_mean
    row = ReportRow(trial_id, math.nan, out.intended, out.committed, out.intent_ok,
                    out.success, out.duration, r2, rmse)
    objects = ep.frames[0].objects
    trace = {
        "trial_id": trial_id,
        "spacing_m": None,
        "objects": [{"id": o.id, "class": o.object_class, "position": o.position.tolist()}
                    for o in objects],
        "wrist": [[f.t, *f.wrist.tolist()] for f in ep.frames],
        "commit_frame": out.commit_frame,
        "reference": None if reference is None else {
            "coeffs": reference.coeffs.tolist(), "d_range": list(reference.d_range)},
        "frames": out.trace,
    }
    return row, trace


def _scene_seed(seed, index):
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def cmd_simulate(args):
    out = Path(args.out)
    if out.exists() and not args.force:
        raise UsageError(f"{out} exists; pass --force to overwrite")
    check_trial_count(args.trials)
    lib = load_library(args.library)
    cfg = _config(args)
    rows, traces = [], []
    if args.episode:
        for path in args.episode:
            row, trace = _simulate_episode(path, lib, cfg, len(rows))
            rows.append(row)
            traces.append(trace)
    else:
        settings = TrialSettings(args.duration, args.fps, args.pos_noise, args.angle_noise)
        for k, path in enumerate(args.scene):
            scene = load_scene(path)
            r, t = simulate_scene(scene, lib, args.trials, _scene_seed(args.seed, k), cfg,
                                  settings, first_trial_id=len(rows))
            rows.extend(r)
            traces.extend(t)
    export_report(rows, out)
    with open(traces_path(out), "w") as fh:
        json.dump({"trials": traces}, fh)
        fh.write("\n")
    print(f"# {len(rows)} trials written to {out}", file=sys.stderr)
    return EXIT_OK


# -- evaluate ----------------------------------------------------------------

def _load_traces(report):
    path = traces_path(report)
    if not path.exists():
        return None
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return {t["trial_id"]: t for t in doc.get("trials", [])}


def sphere_decision(trace, radius=SPHERE_RADIUS):
    """Sphere-proximity target for a stored trial track."""
    objects = [SceneObject(o["id"], o["class"], np.asarray(o["position"], dtype=float))
               for o in trace["objects"]]
    track = np.asarray(trace["wrist"], dtype=float)[:, 1:]
    return sphere_on_track(track, objects, radius)[1].target_id


def _fmt(values):
    v = [x for x in values if not math.isnan(x)]
    return format_mean_std(*mean_std(v)) if v else "-"


def _group_key(spacing):
    return "all" if spacing is None else f"{spacing:g}"


def cmd_evaluate(args):
    rows = load_report(args.report)
    if not rows:
        raise EmptyTrials(f"{args.report}: report has no trials")
    traces = _load_traces(args.report)
    if args.baseline == "sphere" and traces is None:
        raise SchemaError(f"--baseline sphere needs the traces file {traces_path(args.report)}")

    by_id = {r.trial_id: r for r in rows}
    if args.group_by == "spacing":
        groups = by_spacing(r.to_trial() for r in rows)
        ids = {}
        for r in rows:
            t = r.to_trial()
            ids.setdefault(t.object_spacing, []).append(r.trial_id)
    else:
        groups = {None: [r.to_trial() for r in rows]}
        ids = {None: [r.trial_id for r in rows]}

    show_fit = any(not math.isnan(r.r2_mean) for r in rows)
    header = ["group", "n", "acc_pct", "suc_pct", "duration_s"]
    if show_fit:
        header += ["r2", "rmse_deg"]
    print("\t".join(header))
    summary = {}
    for key, trials in groups.items():
        acc = per_round(intent_accuracy, trials, args.round_size)
        suc = per_round(grasp_success_rate, trials, args.round_size)
        dur = mean_std(t.duration for t in trials)
        cells = [_group_key(key), str(len(trials)), format_mean_std(*acc),
                 format_mean_std(*suc), format_mean_std(*dur)]
        if show_fit:
            members = [by_id[i] for i in ids[key]]
            cells += [_fmt(r.r2_mean for r in members), _fmt(r.rmse_mean_deg for r in members)]
        print("\t".join(cells))
        summary[key] = {"acc": acc[0], "acc_std": acc[1]}

    if args.baseline == "sphere":
        print(f"# sphere-proximity baseline, radius {args.radius:g} m")
        print("group\tn\tmtr_acc_pct\tsphere_acc_pct\tmargin_pts")
        for key, trial_ids in ids.items():
            members = [by_id[i] for i in trial_ids if i in traces]
            if not members:
                continue
            mtr = 100.0 * sum(r.intent_ok for r in members) / len(members)
            hits = sum(sphere_decision(traces[r.trial_id], args.radius) == r.intended
                       for r in members)
            sph = 100.0 * hits / len(members)
            summary[key]["baseline"] = sph
            print(f"{_group_key(key)}\t{len(members)}\t{mtr:.2f}\t{sph:.2f}\t{mtr - sph:.2f}")

    if args.figures:
        from .plotting import plot_accuracy, plot_trial
        folder = _figure_dir(args.figures)
        written = [plot_accuracy(summary, folder / "accuracy.png")]
        if traces:
            first = traces[min(traces)]
            written.append(plot_trial(first, folder / f"trial_{first['trial_id']}.png"))
        for path in written:
            print(f"# figure {path}", file=sys.stderr)
    return EXIT_OK


# -- generators --------------------------------------------------------------

def cmd_gen_episodes(args):
    folder = Path(args.out)
    folder.mkdir(parents=True, exist_ok=True)
    classes = args.classes or sorted(synth.CATALOG)
    for k, name in enumerate(classes):
        if name not in synth.CATALOG:
            raise InputError(f"unknown object class {name!r}")
        noise = synth.Noise(args.pos_noise, args.angle_noise)
        ep = synth.modeling_episode(name, _scene_seed(args.seed, k), noise)
        path = folder / f"model-{name}.json"
        save_episode(ep, path)
        print(path)
    return EXIT_OK


def cmd_gen_scene(args):
    if not args.spacing > 0:
        raise InputError("spacing must be positive")
    scene = synth.make_scene(args.spacing, args.seed, args.objects)
    save_scene(scene, args.out)
    print(args.out)
    return EXIT_OK


def _figure_dir(path):
    folder = Path(path)
    folder.mkdir(parents=True, exist_ok=True)
    return folder


# -- parser ------------------------------------------------------------------

def build_parser():
    ap = _Parser(prog="visgrasp",
                 description="Vision-guided prosthetic grasping: gesture library, "
                             "intent estimation and simulated grasp trials.")
    ap.add_argument("--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-library", help="fit gesture functions from modeling episodes")
    p.add_argument("--episodes", required=True, help="directory of episode JSON files")
    p.add_argument("--out", required=True, help="library JSON file to write")
    p.add_argument("--seed", type=int, default=0, help="K-means seed for depth reconstruction")
    p.add_argument("--figures", help="directory for the gesture-curve figure")
    p.set_defaults(func=cmd_build_library)

    p = sub.add_parser("simulate", help="run the grasp controller on episodes or scenes")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--episode", action="append", help="control episode JSON (repeatable)")
    src.add_argument("--scene", action="append", help="scene JSON (repeatable)")
    p.add_argument("--trials", type=int, default=40, help="random reaches per scene")
    p.add_argument("--library", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="report file (.csv or .json)")
    p.add_argument("--force", action="store_true", help="overwrite an existing report")
    p.add_argument("--handedness", choices=("right", "left"), default="right")
    p.add_argument("--time-constant", type=float, default=0.1,
                   help="actuator lag in seconds; 0 for an ideal actuator")
    p.add_argument("--pos-noise", type=float, default=0.005, help="wrist noise sigma (m)")
    p.add_argument("--angle-noise", type=float, default=0.0)
    p.add_argument("--duration", type=float, default=2.0, help="reach duration (s)")
    p.add_argument("--fps", type=float, default=30.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="summarize a simulation report")
    p.add_argument("--report", required=True)
    p.add_argument("--group-by", choices=("spacing", "none"), default="spacing")
    p.add_argument("--baseline", choices=("sphere", "none"), default="none")
    p.add_argument("--radius", type=float, default=SPHERE_RADIUS,
                   help="sphere-baseline radius (m)")
    p.add_argument("--round-size", type=int, default=40,
                   help="trials per round for the accuracy spread")
    p.add_argument("--figures", help="directory for report figures")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gen-episodes", help="write synthetic modeling episodes")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", nargs="*", help="catalog classes (default: all eight)")
    p.add_argument("--pos-noise", type=float, default=0.0)
    p.add_argument("--angle-noise", type=float, default=0.0)
    p.set_defaults(func=cmd_gen_episodes)

    p = sub.add_parser("gen-scene", help="write a random multi-object scene")
    p.add_argument("--spacing", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--objects", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_scene)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"visgrasp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"visgrasp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"visgrasp: file error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ComputationError as exc:
        print(f"visgrasp: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
