"""Bi-objective dominance tools: filtering, front comparison, and the CSV
format shared by the exact solvers, the metaheuristics, and the CLI."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from .model import RouteSolution

# Points whose coordinates both match within this absolute tolerance are
# considered the same point and collapse to the earliest one.
DEDUP_TOL = 1e-9

FRONT_CSV_COLUMNS = ("time_h", "cost", "path", "charge_plan")


class FrontCsvError(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass(frozen=True)
class FrontPoint:
    time_h: float
    cost: float
    payload: Any = None


def dominates(a, b) -> bool:
    """True when a is at least as good as b in both objectives and strictly
    better in at least one. Works on anything with time_h and cost."""
    return (a.time_h <= b.time_h and a.cost <= b.cost
            and (a.time_h < b.time_h or a.cost < b.cost))


@dataclass(frozen=True)
class ParetoFront:
    """Mutually nondominated points sorted by increasing time."""

    points: tuple[FrontPoint, ...]

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


def filter_nondominated(points: Iterable[FrontPoint]) -> ParetoFront:
    """Drop dominated points, collapse near-duplicates (DEDUP_TOL per
    coordinate, keeping the earliest point), sort by time."""
    decorated = [(p.time_h, p.cost, idx, p) for idx, p in enumerate(points)]
    decorated.sort(key=lambda t: (t[0], t[1], t[2]))
    kept: list[tuple[float, float, int, FrontPoint]] = []
    best_cost = None
    for t, c, idx, p in decorated:
        if best_cost is None or c < best_cost:
            kept.append((t, c, idx, p))
            best_cost = c
    merged: list[tuple[float, float, int, FrontPoint]] = []
    for t, c, idx, p in kept:
        if merged and abs(t - merged[-1][0]) <= DEDUP_TOL and abs(c - merged[-1][1]) <= DEDUP_TOL:
            if idx < merged[-1][2]:
                merged[-1] = (t, c, idx, p)
            continue
        merged.append((t, c, idx, p))
    final = sorted(merged, key=lambda t: (t[3].time_h, t[3].cost))
    return ParetoFront(tuple(p for _, _, _, p in final))


@dataclass(frozen=True)
class FrontComparison:
    a_dominated_by_b: int
    b_dominated_by_a: int
    mutual_nondominated: int


def front_compare(a: Sequence[FrontPoint], b: Sequence[FrontPoint]) -> FrontComparison:
    """Cross-dominance counts between two point sets.

    a_dominated_by_b counts points of a strictly dominated by some point of
    b (and vice versa); mutual_nondominated counts the remaining points of
    both sets. Swapping the arguments swaps the first two counts.
    """
    a_dom = sum(1 for p in a if any(dominates(q, p) for q in b))
    b_dom = sum(1 for q in b if any(dominates(p, q) for p in a))
    mutual = (len(a) - a_dom) + (len(b) - b_dom)
    return FrontComparison(a_dominated_by_b=a_dom, b_dominated_by_a=b_dom,
                           mutual_nondominated=mutual)


def _format_solution(sol: RouteSolution | None) -> tuple[str, str]:
    if sol is None:
        return "", ""
    path_s = "-".join(str(u) for u in sol.path)
    charge_s = ";".join(f"{u}:{float(sol.charge_plan[u])!r}"
                        for u in sol.path if u in sol.charge_plan)
    return path_s, charge_s


def write_front_csv(points: Iterable[FrontPoint], destination: str | Path) -> None:
    """Write points (payloads must be RouteSolution or None) to CSV."""
    with open(destination, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FRONT_CSV_COLUMNS)
        for p in points:
            path_s, charge_s = _format_solution(p.payload)
            w.writerow([repr(float(p.time_h)), repr(float(p.cost)), path_s, charge_s])


def _parse_solution(path_s: str, charge_s: str, line: int) -> RouteSolution | None:
    if not path_s:
        return None
    try:
        path = tuple(int(tok) for tok in path_s.split("-"))
    except ValueError as e:
        raise FrontCsvError(line, f"bad path field {path_s!r}") from e
    plan: dict[int, float] = {}
    if charge_s:
        for item in charge_s.split(";"):
            try:
                u, y = item.split(":")
                plan[int(u)] = float(y)
            except ValueError as e:
                raise FrontCsvError(line, f"bad charge_plan entry {item!r}") from e
    return RouteSolution(path=path, charge_plan=plan)


def read_front_csv(source: str | Path) -> list[FrontPoint]:
    """Parse a front CSV back into FrontPoints with RouteSolution payloads.

    Raises FrontCsvError with a line number on malformed input.
    """
    points: list[FrontPoint] = []
    with open(source, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != FRONT_CSV_COLUMNS:
            raise FrontCsvError(1, f"expected header {','.join(FRONT_CSV_COLUMNS)}")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(FRONT_CSV_COLUMNS):
                raise FrontCsvError(line, f"expected {len(FRONT_CSV_COLUMNS)} fields, "
                                    f"got {len(row)}")
            try:
                time_h, cost = float(row[0]), float(row[1])
            except ValueError as e:
                raise FrontCsvError(line, f"bad numeric field in {row[:2]}") from e
            points.append(FrontPoint(time_h=time_h, cost=cost,
                                     payload=_parse_solution(row[2], row[3], line)))
    return points
