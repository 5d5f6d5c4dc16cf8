from functools import lru_cache

import numpy as np
from hypothesis import strategies as st

from maskforge.geometry import Polygon, simplify_loop, trace_loops

_acceptance: dict[int, str] = {}


def histogram_polygon(heights, bar_width=1, x0=0, y0=0) -> Polygon:
    """Simple rectilinear polygon: bars of the given heights standing on y0."""
    w = bar_width
    verts = [(x0, y0), (x0 + w * len(heights), y0)]
    for k in range(len(heights) - 1, -1, -1):
        verts.append((x0 + w * (k + 1), y0 + heights[k]))
        verts.append((x0 + w * k, y0 + heights[k]))
    return Polygon(tuple(simplify_loop(verts)))


@st.composite
def histograms(draw, max_bars=6, max_height=12, max_width=6):
    heights = draw(st.lists(st.integers(1, max_height), min_size=1, max_size=max_bars))
    w = draw(st.integers(1, max_width))
    x0 = draw(st.integers(-20, 20))
    y0 = draw(st.integers(-20, 20))
    flip = draw(st.booleans())
    p = histogram_polygon(heights, w, x0, y0)
    if flip:   # hang the bars from the x axis instead
        p = Polygon(tuple((x, 2 * y0 - y) for x, y in p.vertices))
    return p


@st.composite
def binary_images(draw, max_side=12, density=None):
    h = draw(st.integers(1, max_side))
    w = draw(st.integers(1, max_side))
    bits = draw(st.lists(st.booleans(), min_size=h * w, max_size=h * w))
    return np.array(bits, dtype=bool).reshape(h, w)


def points_in_polygon(poly: Polygon, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Even-odd ray casting, vectorised over query points (independent oracle)."""
    inside = np.zeros(np.broadcast(xs, ys).shape, dtype=bool)
    v = poly.vertices
    n = len(v)
    for k in range(n):
        (xa, ya), (xb, yb) = v[k], v[(k + 1) % n]
        if ya == yb:
            continue
        crosses = (ys >= min(ya, yb)) & (ys < max(ya, yb))
        x_at = xa + (ys - ya) * (xb - xa) / (yb - ya)
        inside ^= crosses & (xs < x_at)
    return inside


def brute_raster(shapes, width, height) -> np.ndarray:
    ys, xs = np.mgrid[0:height, 0:width]
    xs, ys = xs + 0.5, ys + 0.5
    out = np.zeros((height, width), dtype=bool)
    for p in shapes:
        out |= points_in_polygon(p, xs, ys)
    return out


def min_partition(img: np.ndarray) -> int:
    """Exact minimum rectangle partition by exhaustive search (small images only)."""
    h, w = img.shape
    cells = [(r, c) for r in range(h) for c in range(w) if img[r, c]]
    full = sum(1 << (r * w + c) for r, c in cells)

    @lru_cache(maxsize=None)
    def solve(left: int) -> int:
        if not left:
            return 0
        k = (left & -left).bit_length() - 1   # first uncovered pixel is a top-left corner
        r0, c0 = divmod(k, w)
        best = 99
        c_max = w
        for r1 in range(r0, h):
            c = c0
            while c < c_max and left >> (r1 * w + c) & 1:
                c += 1
            c_max = c
            if c_max == c0:
                break
            for c1 in range(c0 + 1, c_max + 1):
                bits = sum(1 << (r * w + cc) for r in range(r0, r1 + 1) for cc in range(c0, c1))
                best = min(best, 1 + solve(left & ~bits))
        return best

    return solve(full)


@lru_cache(maxsize=None)
def few_concave_images(side: int = 4) -> tuple[np.ndarray, ...]:
    """Every side x side image forming one hole-free polygon with at most 2 concave corners."""
    out = []
    for bits in range(1, 1 << (side * side)):
        img = np.array([(bits >> k) & 1 for k in range(side * side)], dtype=bool).reshape(side, side)
        loops = trace_loops(img)
        if len(loops) == 1 and len(loops[0]) <= 8:   # n vertices -> (n - 4) / 2 concave corners
            out.append(img)
    return tuple(out)


def pytest_runtest_logreport(report):
    """Collect outcomes of the acceptance tests (named test_criterion_NN_*)."""
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        num = int(name.split("_")[2])
        detail = dict(report.user_properties).get("detail", "")
        status = "PASS" if report.passed else "FAIL"
        _acceptance[num] = f"criterion {num:2d}: {status}  {name[len('test_criterion_00_'):]}" + (
            f"  ({detail})" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_acceptance):
        terminalreporter.write_line(_acceptance[num])
