"""Minimal dependency-free SVG line plots."""

from __future__ import annotations

from xml.sax.saxutils import escape

_COLORS = ("#1f77b4", "#aec7e8", "#d62728", "#ff9896", "#2ca02c", "#98df8a")


def line_svg(x, series: dict, title: str = "", width: int = 640, height: int = 360,
             bands=()) -> str:
    """Polylines for each ``name -> y`` in ``series`` sharing the abscissa ``x``.

    ``bands`` are ``(x0, x1)`` ranges shaded in the background.
    """
    x = [float(v) for v in x]
    ys = {k: [float(v) for v in vals] for k, vals in series.items()}
    allv = [v for vals in ys.values() for v in vals if abs(v) < 1e300]
    lo, hi = (min(allv), max(allv)) if allv else (-1.0, 1.0)
    if hi == lo:
        hi, lo = hi + 1, lo - 1
    x0, x1 = min(x), max(x)
    m = 40

    def px(v):
        return m + (v - x0) / (x1 - x0) * (width - 2 * m)

    def py(v):
        v = min(max(v, lo), hi)
        return height - m - (v - lo) / (hi - lo) * (height - 2 * m)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    for a, b in bands:
        out.append(f'<rect x="{px(a):.2f}" y="{m}" width="{max(px(b) - px(a), 1):.2f}" '
                   f'height="{height - 2 * m}" fill="#eeeeee"/>')
    if lo < 0 < hi:
        out.append(f'<line x1="{m}" x2="{width - m}" y1="{py(0):.2f}" y2="{py(0):.2f}" stroke="#999"/>')
    for i, (name, vals) in enumerate(ys.items()):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, vals))
        c = _COLORS[i % len(_COLORS)]
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.2" points="{pts}"/>')
        out.append(f'<text x="{width - m - 150}" y="{m + 12 * (i + 1)}" fill="{c}" '
                   f'font-size="11">{escape(name)}</text>')
    out.append(f'<text x="{m}" y="{m - 12}" font-size="13">{escape(title)}</text>')
    out.append(f'<text x="{m}" y="{height - 12}" font-size="11">{x0:.4g}</text>')
    out.append(f'<text x="{width - m - 30}" y="{height - 12}" font-size="11">{x1:.4g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def dispersion_svg(rows, windows=()) -> str:
    w = [r.omega for r in rows]
    series = {}
    for name in ("rho_eff", "kappa_eff", "n_eff"):
        vals = [getattr(r, name) for r in rows]
        series[f"Re {name}"] = [v.real for v in vals]
        series[f"Im {name}"] = [v.imag for v in vals]
    # clip the curves so the resonance poles do not flatten the picture
    series = {k: [max(min(v, 5.0), -5.0) for v in vals] for k, vals in series.items()}
    return line_svg(w, series, "effective parameters", bands=windows)
