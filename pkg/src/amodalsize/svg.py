"""Standalone SVG histograms with no plotting dependency."""

from xml.sax.saxutils import escape


def histogram_svg(counts, edges, title="", marker=None, header="", width=360, height=240):
    """Render bar counts over ``edges`` as an SVG document string.

    ``marker`` draws a vertical line at that x value (e.g. the mean).
    Output depends only on the inputs, so files are reproducible.
    """
    pad_l, pad_r, pad_t, pad_b = 40, 10, 24, 30
    plot_w = width - pad_l - pad_r
    plot_h = height - pad_t - pad_b
    lo, hi = float(edges[0]), float(edges[-1])
    span = hi - lo or 1.0
    top = max(max(counts), 1)

    def sx(v):
        return pad_l + (float(v) - lo) / span * plot_w

    parts = ['<?xml version="1.0" encoding="UTF-8"?>\n']
    if header:
        parts.append(f"<!-- {escape(header.strip().lstrip('#').strip())} -->\n")
    parts.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
                 f'height="{height}" viewBox="0 0 {width} {height}">\n')
    parts.append(f'<text x="{width / 2:.1f}" y="16" text-anchor="middle" '
                 f'font-size="12">{escape(title)}</text>\n')
    for c, a, b in zip(counts, edges[:-1], edges[1:]):
        bh = plot_h * c / top
        parts.append(f'<rect x="{sx(a):.2f}" y="{pad_t + plot_h - bh:.2f}" '
                     f'width="{max(sx(b) - sx(a) - 1, 0.5):.2f}" height="{bh:.2f}" '
                     'fill="#4878a8"/>\n')
    base = pad_t + plot_h
    parts.append(f'<line x1="{pad_l}" y1="{base}" x2="{pad_l + plot_w}" y2="{base}" '
                 'stroke="black"/>\n')
    parts.append(f'<text x="{pad_l}" y="{base + 14}" font-size="10">{lo:.3g}</text>\n')
    parts.append(f'<text x="{pad_l + plot_w}" y="{base + 14}" font-size="10" '
                 f'text-anchor="end">{hi:.3g}</text>\n')
    if marker is not None:
        x = sx(marker)
        parts.append(f'<line x1="{x:.2f}" y1="{pad_t}" x2="{x:.2f}" y2="{base}" '
                     'stroke="orange" stroke-width="2"/>\n')
    parts.append("</svg>\n")
    return "".join(parts)
