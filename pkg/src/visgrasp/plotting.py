"""Report figures written to files next to the delimited output."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .gesture import GestureFunction, degree_of_completion, eval_gesture  # noqa: E402
from .hand import DOF_NAMES  # noqa: E402

DOF_LABELS = dict(zip(DOF_NAMES, ("pinky", "ring", "middle", "index",
                                  "thumb bend", "thumb rotation")))

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def new_figure(nrows=1, ncols=1, width=6.4, aspect=0.62):
    with plt.rc_context(RC):
        fig, axes = plt.subplots(nrows, ncols, figsize=(width, width * aspect), squeeze=False)
    return fig, axes


def save(fig, path):
    with plt.rc_context(RC):
        fig.tight_layout()
        fig.savefig(path)
    plt.close(fig)
    return path


def plot_library(lib, path):
    """Each entry's six gesture curves against degree of completion."""
    fig, axes = new_figure(2, 3, width=9.0, aspect=0.55)
    for entry in lib:
        f = entry.function
        d = np.linspace(f.d_start, f.d_end, 120)
        doc = [degree_of_completion(f.d_start, x, f.d_end) for x in d]
        vals = eval_gesture(f, d)
        for j, ax in enumerate(axes.flat):
            ax.plot(doc, vals[:, j], lw=1.2, label=entry.object_class)
    for j, ax in enumerate(axes.flat):
        ax.set_title(DOF_LABELS[DOF_NAMES[j]])
        ax.set_xlabel("DoC (%)")
        ax.set_ylabel("angle (deg)")
    axes[0, 0].legend(ncol=2, frameon=False)
    return save(fig, path)


def plot_accuracy(groups, path):
    """Bars of intent accuracy per spacing; ``groups`` maps spacing to a dict
    with ``acc``, ``acc_std`` and optionally ``baseline``."""
    spacings = list(groups)
    x = np.arange(len(spacings))
    fig, axes = new_figure()
    ax = axes[0, 0]
    has_base = any(g.get("baseline") is not None for g in groups.values())
    w = 0.38 if has_base else 0.6
    acc = [groups[s]["acc"] for s in spacings]
    err = [groups[s].get("acc_std", 0.0) for s in spacings]
    ax.bar(x - (w / 2 if has_base else 0), acc, w, yerr=err, capsize=3,
           color="#3b6ea8", label="trajectory regression")
    if has_base:
        base = [groups[s].get("baseline") or 0.0 for s in spacings]
        ax.bar(x + w / 2, base, w, color="#c8803a", label="sphere proximity")
        ax.legend(frameon=False, loc="lower left")
    ax.set_xticks(x)
    ax.set_xticklabels([f"{s:g} m" if s is not None else "all" for s in spacings])
    ax.set_xlabel("object spacing")
    ax.set_ylabel("intent accuracy (%)")
    ax.set_ylim(0, 105)
    return save(fig, path)


def plot_trial(trace, path):
    """Executed angles of one trial against its reference gesture function."""
    ref = trace.get("reference")
    frames = [f for f in trace["frames"] if f["stage"] == "Grasping"]
    fig, axes = new_figure(2, 3, width=9.0, aspect=0.55)
    if ref is None or len(frames) < 2:
        axes[0, 0].text(0.5, 0.5, "no grasping-stage samples", ha="center",
                        transform=axes[0, 0].transAxes)
        return save(fig, path)
    f = GestureFunction(np.array(ref["coeffs"]), tuple(ref["d_range"]))
    d = np.array([fr["distance"] for fr in frames])
    actual = np.array([fr["angles"] for fr in frames])
    doc = [degree_of_completion(f.d_start, x, f.d_end) for x in d]
    dd = np.linspace(f.d_start, f.d_end, 120)
    dref = [degree_of_completion(f.d_start, x, f.d_end) for x in dd]
    vals = eval_gesture(f, dd)
    for j, ax in enumerate(axes.flat):
        ax.plot(dref, vals[:, j], "k-", lw=1.0, label="gesture function")
        ax.plot(doc, actual[:, j], "o", ms=2.5, color="#3b6ea8", label="executed")
        ax.set_title(DOF_LABELS[DOF_NAMES[j]])
        ax.set_xlabel("DoC (%)")
    axes[0, 0].set_ylabel("angle (deg)")
    axes[1, 0].set_ylabel("angle (deg)")
    axes[0, 0].legend(frameon=False)
    return save(fig, path)
