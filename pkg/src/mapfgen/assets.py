"""Bundled maps, highways and scenarios."""

from __future__ import annotations

from importlib import resources

from .formats import parse_highway, parse_map, parse_scenario
from .model import Flavor, Instance, Workspace

Highway = frozenset


def _read(name: str) -> str:
    return resources.files("mapfgen.data").joinpath(name).read_text()


def kiva_map() -> Workspace:
    """21x13 warehouse: aisles on every third row and fifth column around 2x4 storage blocks."""
    return parse_map(_read("kiva.map"))


def kiva_highway(ws: Workspace | None = None) -> Highway:
    """Hand-made one-way circulation: aisle directions alternate row by row and column by column."""
    ws = ws or kiva_map()
    return parse_highway(_read("kiva.hwy"), ws)


def two_corridor_map() -> Workspace:
    return parse_map(_read("two_corridor.map"))


def two_corridor_highway(ws: Workspace | None = None) -> Highway:
    """Top corridor eastbound, bottom corridor westbound."""
    ws = ws or two_corridor_map()
    return parse_highway(_read("two_corridor.hwy"), ws)


def headon_corridor(flavor: Flavor = Flavor.MAPF) -> Instance:
    """Two movers at the ends of a 1x3 corridor, each bound for the other end."""
    ws = parse_map(_read("corridor.map"))
    inst = parse_scenario(_read("headon.scen"), ws)
    return inst if flavor is inst.flavor else inst.as_flavor(flavor)
