"""SVG drawings of schedules, tours and facility plans."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from typing import Sequence

from .facility import FacilityInstance, FacilityPlan
from .scheduling import Schedule

LANE = 24
LEFT = 90
TOP = 30
WIDTH = 640
STRIP = 60
PALETTE = ("#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
           "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac")


def _svg(width: float, height: float) -> ET.Element:
    return ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=f"{width:g}",
                      height=f"{height:g}", viewBox=f"0 0 {width:g} {height:g}")


def _text(parent: ET.Element, x: float, y: float, text: str, **attrs: str) -> None:
    node = ET.SubElement(parent, "text", x=f"{x:.2f}", y=f"{y:.2f}", **{"font-size": "11"}, **attrs)
    node.text = text


def _dump(root: ET.Element) -> str:
    ET.indent(root)
    return ET.tostring(root, encoding="unicode", xml_declaration=False)


def render_gantt(schedule: Schedule, usage: Sequence[Sequence[int]] | None = None,
                 capacities: Sequence[int] | None = None, title: str = "") -> str:
    """Gantt chart, one lane per machine or job; optional resource strips below.

    ``usage[r][t]`` is the level of resource r during step t.
    """
    horizon = max(schedule.makespan, 1.0)
    scale = WIDTH / horizon
    lanes = schedule.lanes or tuple(str(i) for i in range(1 + max((t.lane for t in schedule.tasks), default=-1)))
    strips = len(usage) if usage else 0
    height = TOP + LANE * len(lanes) + 30 + strips * (STRIP + 20)
    root = _svg(LEFT + WIDTH + 20, height)
    if title:
        _text(root, LEFT, 16, title)

    axis_y = TOP + LANE * len(lanes)
    ET.SubElement(root, "line", {"class": "axis", "x1": str(LEFT), "y1": str(axis_y),
                                 "x2": f"{LEFT + WIDTH}", "y2": str(axis_y), "stroke": "black"})
    step = max(1, math.ceil(horizon / 20))
    for t in range(0, int(math.ceil(horizon)) + 1, step):
        x = LEFT + t * scale
        ET.SubElement(root, "line", x1=f"{x:.2f}", y1=str(axis_y), x2=f"{x:.2f}", y2=str(axis_y + 4), stroke="black")
        _text(root, x - 3, axis_y + 15, str(t))
    for i, name in enumerate(lanes):
        _text(root, 4, TOP + LANE * i + LANE * 0.65, name)

    for task in schedule.tasks:
        y = TOP + LANE * task.lane + 3
        job = task.key[0] if isinstance(task.key, tuple) else task.key
        colour = PALETTE[int(job) % len(PALETTE)]
        rect = ET.SubElement(root, "rect", {
            "class": "task", "x": f"{LEFT + task.start * scale:.2f}", "y": str(y),
            "width": f"{task.duration * scale:.2f}", "height": str(LANE - 6),
            "fill": colour, "stroke": "black"})
        ET.SubElement(rect, "title").text = f"{task.label}: [{task.start:g}, {task.end:g})"
        _text(root, LEFT + task.start * scale + 2, y + LANE * 0.55, task.label)

    for r in range(strips):
        base = axis_y + 30 + r * (STRIP + 20) + STRIP
        cap = capacities[r] if capacities else max(max(usage[r], default=0), 1)
        _text(root, 4, base - STRIP / 2, f"R{r + 1} (c={cap})")
        ET.SubElement(root, "line", x1=str(LEFT), y1=f"{base - STRIP:.2f}", x2=f"{LEFT + WIDTH}",
                      y2=f"{base - STRIP:.2f}", stroke="grey", **{"stroke-dasharray": "4 2"})
        for t, level in enumerate(usage[r]):
            if level:
                h = STRIP * level / max(cap, 1)
                ET.SubElement(root, "rect", {"class": "usage", "x": f"{LEFT + t * scale:.2f}",
                                             "y": f"{base - h:.2f}", "width": f"{scale:.2f}",
                                             "height": f"{h:.2f}", "fill": "#bbbbbb"})
    return _dump(root)


def circle_layout(n: int, radius: float = 200.0, centre: float = 250.0) -> list[tuple[float, float]]:
    """Equal-angle positions, node 0 at the top, going clockwise."""
    return [(centre + radius * math.sin(2 * math.pi * k / n), centre - radius * math.cos(2 * math.pi * k / n))
            for k in range(n)]


def _fit(points: Sequence[tuple[float, float]], size: float = 460.0, margin: float = 20.0):
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    span = max(max(xs) - min(xs), max(ys) - min(ys), 1e-9)
    k = size / span
    # flip y so that larger coordinates are drawn higher up
    return [(margin + (x - min(xs)) * k, margin + (max(ys) - y) * k) for x, y in points]


def render_tour(order: Sequence[int], names: Sequence[str],
                coords: Sequence[tuple[float, float]] | None = None, title: str = "") -> str:
    """Tour drawing: one circle per location, one line per hop."""
    n = len(names)
    pos = _fit(coords) if coords else circle_layout(n)
    root = _svg(500, 520)
    if title:
        _text(root, 10, 510, title)
    for a, b in zip(order, order[1:]):
        (x1, y1), (x2, y2) = pos[a], pos[b]
        ET.SubElement(root, "line", {"class": "edge", "x1": f"{x1:.2f}", "y1": f"{y1:.2f}",
                                     "x2": f"{x2:.2f}", "y2": f"{y2:.2f}", "stroke": "#4e79a7",
                                     "stroke-width": "2"})
    for i, (x, y) in enumerate(pos):
        ET.SubElement(root, "circle", {"class": "node", "cx": f"{x:.2f}", "cy": f"{y:.2f}", "r": "6",
                                       "fill": "#e15759" if i == 0 else "white", "stroke": "black"})
        _text(root, x + 8, y - 8, names[i])
    return _dump(root)


def render_facility(plan: FacilityPlan, instance: FacilityInstance, title: str = "") -> str:
    """Sites as squares, customers as circles, one line per positive shipment."""
    points = _fit(list(instance.site_coords) + list(instance.customer_coords))
    sites, customers = points[:instance.num_sites], points[instance.num_sites:]
    root = _svg(500, 520)
    if title:
        _text(root, 10, 510, title)
    heaviest = max(plan.shipments.values(), default=0.0) or 1.0
    for (s, c), units in sorted(plan.shipments.items()):
        if units > 0:
            (x1, y1), (x2, y2) = sites[s], customers[c]
            ET.SubElement(root, "line", {"class": "edge", "x1": f"{x1:.2f}", "y1": f"{y1:.2f}",
                                         "x2": f"{x2:.2f}", "y2": f"{y2:.2f}", "stroke": "#59a14f",
                                         "stroke-width": f"{1 + 3 * units / heaviest:.2f}"})
    for s, (x, y) in enumerate(sites):
        built = s in plan.open_sites
        ET.SubElement(root, "rect", {"class": "node site", "x": f"{x - 7:.2f}", "y": f"{y - 7:.2f}",
                                     "width": "14", "height": "14",
                                     "fill": "#e15759" if built else "white", "stroke": "black"})
        label = f"{instance.site_ids[s]}"
        if built:
            label += f" ({plan.installed_capacity[s]:g})"
        _text(root, x + 9, y - 9, label)
    for c, (x, y) in enumerate(customers):
        ET.SubElement(root, "circle", {"class": "node customer", "cx": f"{x:.2f}", "cy": f"{y:.2f}",
                                       "r": "5", "fill": "#4e79a7", "stroke": "black"})
        _text(root, x + 7, y + 12, instance.customer_ids[c])
    return _dump(root)
