"""Tracing harness for matplotlib plotting scripts.

Invoked as: python3 harness.py <script> <out_dir> <seed> <dpi>

Executes the script with the high-level Axes chart methods wrapped, then
renders every recorded primitive in isolation over a transparent background
and writes:

    out_dir/trace.json   calls, primitives (with column-major RLE renders)
    out_dir/image.rgb    raw H*W*3 bytes of the full render

Exit codes: 0 ok, 3 script raised, 4 harness failure.
"""

import functools
import json
import os
import random
import sys
import traceback

os.environ.setdefault("MPLBACKEND", "Agg")

import numpy as np  # noqa: E402
import matplotlib  # noqa: E402

matplotlib.use("Agg", force=True)

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.axes import Axes  # noqa: E402
from matplotlib.container import BarContainer  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

INSTRUMENTED = (
    "plot",
    "scatter",
    "bar",
    "barh",
    "hist",
    "boxplot",
    "errorbar",
    "pie",
    "fill",
    "fill_between",
    "stackplot",
    "add_patch",
)

NO_LINE = ("None", "none", "", " ", None)

SCRIPT_PATH = None
CALLS = []
PRIMS = []
EXECUTED = set()
_DEPTH = [0]


class Prim:
    """One primitive record plus the recipe to isolate it."""

    def __init__(self, role, call, per_datum, parts, variants=None):
        self.id = "p%d" % len(PRIMS)
        self.role = role
        self.call = call
        self.per_datum = per_datum
        # parts: list of (artist, kind, payload); kind in {artist, point, segment, marker}
        self.parts = parts
        self.variants = variants or []
        PRIMS.append(self)


def _script_line():
    frame = sys._getframe(2)
    while frame is not None:
        if frame.f_code.co_filename == SCRIPT_PATH:
            return frame.f_lineno
        frame = frame.f_back
    return None


def _has_line(line):
    return line.get_linestyle() not in NO_LINE and line.get_linewidth() > 0


def _has_marker(line):
    return line.get_marker() not in NO_LINE


def _color_spec(args, kwargs):
    for key in ("color", "c", "colors", "facecolor"):
        if key in kwargs and isinstance(kwargs[key], str):
            return kwargs[key]
    return None


def _record(name, ax, line, args, kwargs, ret):
    call = {
        "index": len(CALLS),
        "line": line,
        "api_name": name,
        "axes": ax,
        "axes_kind": "polar" if getattr(ax, "name", "") == "polar" else "cartesian",
        "arg_summary": {
            "linestyle": False,
            "marker": None,
            "color": _color_spec(args, kwargs),
            "orientation": None,
        },
        "primitives": [],
    }
    CALLS.append(call)
    summary = call["arg_summary"]

    def add(role, per_datum, parts, variants=None):
        p = Prim(role, call["index"], per_datum, parts, variants)
        call["primitives"].append(p.id)

    if name == "plot":
        flat = 0
        for k, ln in enumerate(ret):
            line_on, marker_on = _has_line(ln), _has_marker(ln)
            if k == 0:
                summary["linestyle"] = line_on
                summary["marker"] = str(ln.get_marker()) if marker_on else None
            variants = ["line_only", "markers_only"] if (line_on and marker_on) else []
            add("line_path", k, [(ln, "artist", None)], variants)
            if marker_on:
                n = len(ln.get_xydata())
                for j in range(n):
                    add("marker_set", flat, [(ln, "marker", j)])
                    flat += 1
    elif name == "scatter":
        summary["marker"] = str(kwargs.get("marker", matplotlib.rcParams["scatter.marker"]))
        n = len(ret.get_offsets())
        for j in range(n):
            add("marker_set", j, [(ret, "point", j)])
    elif name in ("bar", "barh"):
        summary["orientation"] = "vertical" if name == "bar" else "horizontal"
        for j, patch in enumerate(ret.patches):
            add("bar_patch", j, [(patch, "artist", None)])
    elif name == "hist":
        summary["orientation"] = kwargs.get("orientation", "vertical")
        patches = ret[2]
        groups = [patches] if isinstance(patches, BarContainer) else list(patches)
        flat = 0
        for g in groups:
            items = list(g) if isinstance(g, (BarContainer, list, tuple)) else [g]
            for patch in items:
                if isinstance(patch, Rectangle):
                    add("bin_patch", flat, [(patch, "artist", None)])
                    flat += 1
    elif name == "boxplot":
        vert = kwargs.get("vert", None)
        orient = kwargs.get("orientation", None)
        if orient is None:
            orient = "horizontal" if vert is False else "vertical"
        summary["orientation"] = orient
        for j, a in enumerate(ret.get("boxes", [])):
            add("box_body", j, [(a, "artist", None)])
        for j, a in enumerate(ret.get("medians", [])):
            add("median", j, [(a, "artist", None)])
        for j, a in enumerate(ret.get("whiskers", [])):
            add("whisker", j, [(a, "artist", None)])
        for j, a in enumerate(ret.get("caps", [])):
            add("cap", j, [(a, "artist", None)])
    elif name == "errorbar":
        data_line, caplines, barlinecols = ret.lines
        has_y = kwargs.get("yerr") is not None or len(args) > 2
        has_x = kwargs.get("xerr") is not None or len(args) > 3
        summary["orientation"] = "both" if (has_x and has_y) else ("horizontal" if has_x else "vertical")
        n = max([len(c.get_segments()) for c in barlinecols] + [0])
        for j in range(n):
            add("errorbar_line", j, [(c, "segment", j) for c in barlinecols if j < len(c.get_segments())])
        if caplines:
            m = max(len(c.get_xydata()) for c in caplines)
            for j in range(m):
                add("errorbar_cap", j, [(c, "marker", j) for c in caplines if j < len(c.get_xydata())])
    elif name == "pie":
        for j, w in enumerate(ret[0]):
            add("wedge", j, [(w, "artist", None)])
    elif name == "fill":
        for j, poly in enumerate(ret):
            add("area_patch", j, [(poly, "artist", None)])
    elif name == "fill_between":
        add("area_patch", 0, [(ret, "artist", None)])
    elif name == "stackplot":
        for j, coll in enumerate(ret):
            add("area_patch", j, [(coll, "artist", None)])
    elif name == "add_patch":
        if isinstance(ret, Rectangle):
            add("rectangle", 0, [(ret, "artist", None)])


def _instrument(name):
    orig = getattr(Axes, name)

    @functools.wraps(orig)
    def wrapper(self, *args, **kwargs):
        if _DEPTH[0] > 0:
            return orig(self, *args, **kwargs)
        line = _script_line()
        _DEPTH[0] += 1
        try:
            ret = orig(self, *args, **kwargs)
        finally:
            _DEPTH[0] -= 1
        _record(name, self, line, args, kwargs, ret)
        return ret

    setattr(Axes, name, wrapper)


def _line_tracer(frame, event, arg):
    if frame.f_code.co_filename != SCRIPT_PATH:
        return None

    def local(frame, event, arg):
        if event == "line":
            EXECUTED.add(frame.f_lineno)
        return local

    return local


# --- isolation rendering -------------------------------------------------


def _alpha(fig):
    fig.canvas.draw()
    buf = np.asarray(fig.canvas.buffer_rgba())
    return buf[..., 3] > 0


def _rle(mask):
    flat = np.ascontiguousarray(mask.T).reshape(-1).astype(np.int8)
    if flat.size == 0:
        return []
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs = [0] + runs
    return runs


def _show_part(artist, kind, payload, saved):
    """Make one part drawable alone; returns a restore closure."""
    artist.set_visible(saved.get(id(artist), True))
    if kind == "artist":
        return lambda: None
    if kind == "marker":
        ls, me = artist.get_linestyle(), artist.get_markevery()
        artist.set_linestyle("None")
        artist.set_markevery([payload])

        def restore():
            artist.set_linestyle(ls)
            artist.set_markevery(me)

        return restore
    if kind == "point":
        off = artist.get_offsets().copy()
        sizes = artist.get_sizes().copy()
        fc = np.array(artist.get_facecolor())
        ec = np.array(artist.get_edgecolor())
        lw = np.array(artist.get_linewidths())
        arr = artist.get_array()
        artist.set_array(None)
        artist.set_offsets(off[payload:payload + 1])
        if len(sizes) > 1:
            artist.set_sizes(sizes[payload:payload + 1])
        if len(fc) > 1:
            artist.set_facecolor(fc[payload:payload + 1])
        if len(ec) > 1:
            artist.set_edgecolor(ec[payload:payload + 1])
        if len(lw) > 1:
            artist.set_linewidths(lw[payload:payload + 1])

        def restore():
            artist.set_offsets(off)
            artist.set_sizes(sizes)
            artist.set_facecolor(fc)
            artist.set_edgecolor(ec)
            artist.set_linewidths(lw)
            artist.set_array(arr)

        return restore
    if kind == "segment":
        segs = artist.get_segments()
        colors = np.array(artist.get_colors())
        lw = np.array(artist.get_linewidths())
        artist.set_segments([segs[payload]])
        if len(colors) > 1:
            artist.set_color(colors[payload:payload + 1])
        if len(lw) > 1:
            artist.set_linewidths(lw[payload:payload + 1])

        def restore():
            artist.set_segments(segs)
            artist.set_color(colors)
            artist.set_linewidths(lw)

        return restore
    raise ValueError(kind)


def _variant(artist, variant):
    if variant == "line_only":
        m = artist.get_marker()
        artist.set_marker("None")
        return lambda: artist.set_marker(m)
    if variant == "markers_only":
        ls = artist.get_linestyle()
        artist.set_linestyle("None")
        return lambda: artist.set_linestyle(ls)
    return lambda: None


def _render_prims(fig):
    everything = [a for a in fig.findobj() if a is not fig and not isinstance(a, Axes)]
    saved = {id(a): a.get_visible() for a in everything}
    fig.patch.set_visible(False)
    for a in everything:
        a.set_visible(False)
    out = []
    for p in PRIMS:
        renders = {}
        for variant in ["full"] + p.variants:
            restores = []
            for artist, kind, payload in p.parts:
                restores.append(_show_part(artist, kind, payload, saved))
                if variant != "full":
                    restores.append(_variant(artist, variant))
            renders[variant] = _rle(_alpha(fig))
            for r in reversed(restores):
                r()
            for artist, _, _ in p.parts:
                artist.set_visible(False)
        out.append(
            {
                "id": p.id,
                "role": p.role,
                "call": p.call,
                "per_datum_index": p.per_datum,
                "renders": renders,
            }
        )
    return out


def _root_figure(ax):
    try:
        return ax.get_figure(root=True)
    except TypeError:
        f = ax.figure
        while getattr(f, "figure", f) is not f:
            f = f.figure
        return f


def _fail(out_dir, status, message, code):
    with open(os.path.join(out_dir, "trace.json"), "w") as fh:
        json.dump({"status": status, "message": message}, fh)
    sys.exit(code)


def main():
    global SCRIPT_PATH
    script, out_dir, seed, dpi = sys.argv[1], sys.argv[2], int(sys.argv[3]), float(sys.argv[4])
    SCRIPT_PATH = os.path.abspath(script)
    random.seed(seed)
    np.random.seed(seed)
    matplotlib.rcParams["figure.dpi"] = dpi
    matplotlib.rcParams["savefig.dpi"] = dpi
    matplotlib.rcParams["svg.hashsalt"] = str(seed)
    for name in INSTRUMENTED:
        _instrument(name)
    plt.show = lambda *a, **k: None

    with open(SCRIPT_PATH, "r", encoding="utf-8") as fh:
        source = fh.read()
    code = compile(source, SCRIPT_PATH, "exec")
    glb = {"__name__": "__main__", "__file__": SCRIPT_PATH}
    sys.settrace(_line_tracer)
    try:
        exec(code, glb)
    except SystemExit as exc:
        if exc.code not in (None, 0):
            sys.settrace(None)
            _fail(out_dir, "script_error", "script exited with status %r" % (exc.code,), 3)
    except BaseException as exc:  # noqa: BLE001
        sys.settrace(None)
        tb = traceback.extract_tb(exc.__traceback__)
        where = ""
        for frame in reversed(tb):
            if frame.filename == SCRIPT_PATH:
                where = " (line %d)" % frame.lineno
                break
        _fail(out_dir, "script_error", "%s: %s%s" % (type(exc).__name__, exc, where), 3)
    sys.settrace(None)

    figs = []
    for c in CALLS:
        f = _root_figure(c["axes"])
        if all(f is not g for g in figs):
            figs.append(f)
    if len(figs) > 1:
        _fail(out_dir, "script_error", "traced calls span %d figures" % len(figs), 3)
    if figs:
        fig = figs[0]
    elif plt.get_fignums():
        fig = plt.gcf()
    else:
        _fail(out_dir, "script_error", "script produced no figure", 3)

    fig.set_dpi(dpi)
    fig.canvas.draw()
    rgba = np.asarray(fig.canvas.buffer_rgba()).copy()
    height, width = rgba.shape[0], rgba.shape[1]
    # composite over white so the stored raster is opaque RGB
    alpha = rgba[..., 3:4].astype(np.float64) / 255.0
    rgb = np.round(rgba[..., :3].astype(np.float64) * alpha + 255.0 * (1.0 - alpha)).astype(np.uint8)
    with open(os.path.join(out_dir, "image.rgb"), "wb") as fh:
        fh.write(rgb.tobytes())

    axes_list = list(fig.get_axes())
    registry = []
    for k, ax in enumerate(axes_list):
        bb = ax.get_window_extent()
        registry.append(
            {
                "id": "ax%d" % k,
                "kind": "polar" if getattr(ax, "name", "") == "polar" else "cartesian",
                "bbox": [float(bb.x0), float(height - bb.y1), float(bb.x1), float(height - bb.y0)],
            }
        )

    prims = _render_prims(fig)
    calls = []
    for c in CALLS:
        try:
            axes_id = "ax%d" % axes_list.index(c["axes"])
        except ValueError:
            axes_id = "ax?"
        calls.append(
            {
                "index": c["index"],
                "line": c["line"],
                "api_name": c["api_name"],
                "axes_id": axes_id,
                "axes_kind": c["axes_kind"],
                "arg_summary": c["arg_summary"],
                "primitives": c["primitives"],
            }
        )
    trace = {
        "status": "ok",
        "width": width,
        "height": height,
        "render_scale": dpi,
        "executed_lines": sorted(EXECUTED),
        "axes": registry,
        "calls": calls,
        "primitives": prims,
    }
    with open(os.path.join(out_dir, "trace.json"), "w") as fh:
        json.dump(trace, fh)


if __name__ == "__main__":
    try:
        main()
    except SystemExit:
        raise
    except BaseException:  # noqa: BLE001
        sys.stderr.write(traceback.format_exc())
        sys.exit(4)
