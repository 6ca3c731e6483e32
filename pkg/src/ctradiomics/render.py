"""Minimal standalone SVG line plots for ROC, calibration and decision curves."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

W, H = 480, 400
ML, MR, MT, MB = 60, 20, 40, 50
COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#7f7f7f")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def line_plot(series, title, xlabel, ylabel, xlim=(0.0, 1.0), ylim=(0.0, 1.0)) -> str:
    """``series``: list of (label, xs, ys, dashed).  One polyline per series."""
    x0, x1 = xlim
    y0, y1 = ylim
    if y1 <= y0:
        y1 = y0 + 1.0
    pw, ph = W - ML - MR, H - MT - MB

    def px(x):
        return ML + (min(max(x, x0), x1) - x0) / (x1 - x0) * pw

    def py(y):
        return MT + ph - (min(max(y, y0), y1) - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
           f'<line x1="{ML}" y1="{MT + ph}" x2="{ML + pw}" y2="{MT + ph}" stroke="black"/>',
           f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{MT + ph}" stroke="black"/>']
    for i in range(6):
        fx = x0 + (x1 - x0) * i / 5
        fy = y0 + (y1 - y0) * i / 5
        out.append(f'<text x="{_fmt(px(fx))}" y="{MT + ph + 16}" text-anchor="middle" '
                   f'font-size="11">{fx:.2g}</text>')
        out.append(f'<text x="{ML - 6}" y="{_fmt(py(fy) + 4)}" text-anchor="end" '
                   f'font-size="11">{fy:.2g}</text>')
    out.append(f'<text x="{ML + pw / 2}" y="{H - 10}" text-anchor="middle" '
               f'font-size="13">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{MT + ph / 2}" text-anchor="middle" font-size="13" '
               f'transform="rotate(-90 16 {MT + ph / 2})">{escape(ylabel)}</text>')
    for k, (label, xs, ys, dashed) in enumerate(series):
        colour = COLOURS[k % len(COLOURS)]
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
        dash = ' stroke-dasharray="5,4"' if dashed else ""
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.6"{dash} '
                   f'points="{pts}"><title>{escape(label)}</title></polyline>')
        ly = MT + 14 + 16 * k
        out.append(f'<text x="{ML + pw - 4}" y="{ly}" text-anchor="end" font-size="11" '
                   f'fill="{colour}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_report(doc: dict, out_dir) -> list[Path]:
    """ROC, calibration and decision-curve SVGs per split from a report document."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    models = doc["models"]
    splits = sorted({s for m in models.values() for s in m})
    written = []
    for split in splits:
        entries = [(name, models[name][split]) for name in sorted(models) if split in models[name]]

        roc = [(f"{n} (AUC {e['roc']['auc']:.3f})", e["roc"]["fpr"], e["roc"]["tpr"], False)
               for n, e in entries if e["roc"]["auc"] is not None]
        roc.append(("chance", [0, 1], [0, 1], True))
        written.append(_write(out / f"roc_{split}.svg",
                              line_plot(roc, f"ROC ({split})", "1 - specificity", "sensitivity")))

        cal = []
        for n, e in entries:
            c = e["calibration"]
            cal.append((f"{n} bins", c["mean_predicted"], c["observed"], False))
            iso = c["isotonic"]
            cal.append((f"{n} isotonic", iso["breakpoints"], iso["levels"], True))
        cal.append(("ideal", [0, 1], [0, 1], True))
        written.append(_write(out / f"calibration_{split}.svg",
                              line_plot(cal, f"Calibration ({split})", "predicted probability",
                                        "observed fraction")))

        dc = []
        for n, e in entries:
            d = e["decision"]
            dc.append((n, d["thresholds"], d["nb_model"], False))
        if entries:
            d = entries[0][1]["decision"]
            dc.append(("treat all", d["thresholds"], d["nb_all"], True))
            dc.append(("treat none", d["thresholds"], d["nb_none"], True))
        top = max([max(s[2]) for s in dc] + [0.05])
        written.append(_write(out / f"decision_{split}.svg",
                              line_plot(dc, f"Decision curve ({split})", "threshold probability",
                                        "net benefit", ylim=(-0.05, top + 0.05))))
    return written


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path
