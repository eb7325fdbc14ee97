"""Distribution networks compiled to linear systems, and rank maps back onto components."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, UnknownLabel
from .model import AffineConstraint, LinearSystem

ARC_PREFIXES = ("lambda_L", "lambda_U")
SUPPLIER_PREFIXES = ("gamma_L", "gamma_U")
GRAY = "#A0A0A0"


@dataclass(frozen=True)
class Arc:
    id: str
    source: str
    target: str
    capacity: float


@dataclass(frozen=True)
class Supplier:
    id: str
    node: str
    capacity: float


@dataclass(frozen=True)
class Demand:
    id: str
    node: str
    uncertain: bool = True
    fixed_value: float = None


@dataclass(frozen=True)
class NetworkModel:
    nodes: tuple
    arcs: tuple
    suppliers: tuple
    demands: tuple
    name: str = ""
    note: str = ""

    @property
    def uncertain_demands(self):
        return [d for d in self.demands if d.uncertain]


def validate_network(net):
    diags = []
    nodes = set(net.nodes)
    if len(nodes) != len(net.nodes):
        diags.append("nodes: duplicate identifiers")
    for kind, items in (("arc", net.arcs), ("supplier", net.suppliers), ("demand", net.demands)):
        ids = [it.id for it in items]
        for dup in sorted({i for i in ids if ids.count(i) > 1}):
            diags.append(f"{kind} '{dup}': duplicate identifier")
    for a in net.arcs:
        for end in (a.source, a.target):
            if end not in nodes:
                diags.append(f"arc '{a.id}': unknown node '{end}'")
        if a.source == a.target:
            diags.append(f"arc '{a.id}': self loop")
        if not (math.isfinite(a.capacity) and a.capacity > 0):
            diags.append(f"arc '{a.id}': capacity must be finite and positive")
    for s in net.suppliers:
        if s.node not in nodes:
            diags.append(f"supplier '{s.id}': unknown node '{s.node}'")
        if not (math.isfinite(s.capacity) and s.capacity > 0):
            diags.append(f"supplier '{s.id}': capacity must be finite and positive")
    for d in net.demands:
        if d.node not in nodes:
            diags.append(f"demand '{d.id}': unknown node '{d.node}'")
        if not d.uncertain and (d.fixed_value is None or not math.isfinite(d.fixed_value)):
            diags.append(f"demand '{d.id}': fixed demand needs a finite fixed_value")
    if not net.uncertain_demands:
        diags.append("demands: at least one uncertain demand is required")
    return diags


def build_system(net):
    """Node balances as equalities, arc and supplier bounds as labeled inequalities."""
    diags = validate_network(net)
    if diags:
        raise InputError("invalid network: " + "; ".join(diags))
    theta = [d.id for d in net.uncertain_demands]
    rec = [f"flow:{a.id}" for a in net.arcs] + [f"supply:{s.id}" for s in net.suppliers]
    nt, nz = len(theta), len(rec)
    na = len(net.arcs)
    eqs = []
    for n in net.nodes:
        az = np.zeros(nz)
        for k, a in enumerate(net.arcs):
            if a.target == n:
                az[k] += 1.0
            if a.source == n:
                az[k] -= 1.0
        for k, s in enumerate(net.suppliers):
            if s.node == n:
                az[na + k] = 1.0
        at = np.zeros(nt)
        rhs = 0.0
        for d in net.demands:
            if d.node != n:
                continue
            if d.uncertain:
                at[theta.index(d.id)] = -1.0
            else:
                rhs += d.fixed_value
        eqs.append(AffineConstraint(f"balance:{n}", at, az, np.zeros(0), rhs))
    ineqs = []
    zero = np.zeros(nt)
    for k, a in enumerate(net.arcs):
        e = np.zeros(nz)
        e[k] = 1.0
        ineqs.append(AffineConstraint(f"lambda_L:{a.id}", zero, -e, np.zeros(0), a.capacity))
        ineqs.append(AffineConstraint(f"lambda_U:{a.id}", zero, e, np.zeros(0), a.capacity))
    for k, s in enumerate(net.suppliers):
        e = np.zeros(nz)
        e[na + k] = 1.0
        ineqs.append(AffineConstraint(f"gamma_L:{s.id}", zero, -e, np.zeros(0), 0.0))
        ineqs.append(AffineConstraint(f"gamma_U:{s.id}", zero, e, np.zeros(0), s.capacity))
    return LinearSystem(tuple(theta), tuple(rec), (), tuple(ineqs), tuple(eqs))


def parse_label(label):
    """``'lambda_U:a1'`` -> ``('arc', 'a1')``."""
    prefix, sep, ident = str(label).partition(":")
    if sep and ident:
        if prefix in ARC_PREFIXES:
            return "arc", ident
        if prefix in SUPPLIER_PREFIXES:
            return "supplier", ident
    raise UnknownLabel(f"label '{label}' does not follow the network naming scheme")


@dataclass
class ComponentRankMap:
    # (kind, id) -> {"level", "F", "labels"}; kinds are "arc" and "supplier"
    ranked: dict = field(default_factory=dict)
    unranked: list = field(default_factory=list)

    def rows(self):
        out = [{"component": f"{k}:{i}", "kind": k, "id": i, **v}
               for (k, i), v in self.ranked.items()]
        out.sort(key=lambda r: (r["level"], r["kind"], r["id"]))
        out += [{"component": f"{k}:{i}", "kind": k, "id": i, "level": None, "F": None,
                 "labels": []} for k, i in self.unranked]
        return out


def component_rank_map(net, ranks):
    """Each arc or supplier gets the best level among its constraint labels."""
    known = {("arc", a.id) for a in net.arcs} | {("supplier", s.id) for s in net.suppliers}
    ranked = {}
    for lv in ranks:
        for lab in lv.constraint_labels:
            key = parse_label(lab)
            if key not in known:
                raise UnknownLabel(f"label '{lab}' names no {key[0]} of this network")
            cur = ranked.get(key)
            if cur is None or lv.level < cur["level"]:
                ranked[key] = {"level": lv.level, "F": lv.F_value, "labels": [lab]}
            elif lv.level == cur["level"] and lab not in cur["labels"]:
                cur["labels"].append(lab)
    order = [("arc", a.id) for a in net.arcs] + [("supplier", s.id) for s in net.suppliers]
    return ComponentRankMap(ranked, [k for k in order if k not in ranked])


def gradient_color(F, F_min, F_max):
    """Red for the most limiting index, yellow for the least."""
    t = 0.0 if F_max <= F_min else (F - F_min) / (F_max - F_min)
    return "#FF{:02X}00".format(int(round(255 * min(max(t, 0.0), 1.0))))


def _q(s):
    # backslashes pass through so "\\n" stays a DOT line break
    return '"' + str(s).replace('"', '\\"') + '"'


def emit_dot(net, cmap):
    Fs = [v["F"] for v in cmap.ranked.values() if v["F"] is not None and math.isfinite(v["F"])]
    lo, hi = (min(Fs), max(Fs)) if Fs else (0.0, 0.0)

    def style(kind, ident):
        v = cmap.ranked.get((kind, ident))
        if v is None or v["F"] is None or not math.isfinite(v["F"]):
            return GRAY, "unranked"
        return gradient_color(v["F"], lo, hi), f"rank {v['level']}, F={v['F']:.6g}"

    lines = [f"digraph {_q(net.name or 'network')} {{", "  rankdir=LR;",
             '  node [fontname="Helvetica"];', '  edge [fontname="Helvetica"];']
    for n in net.nodes:
        dem = [d.id for d in net.demands if d.node == n]
        label = n + ("\\n" + ", ".join(dem) if dem else "")
        lines.append(f"  {_q('n:' + n)} [shape=circle, label={_q(label)}];")
    for s in net.suppliers:
        color, note = style("supplier", s.id)
        label = _q(s.id + "\\n" + note)
        lines.append(f"  {_q('s:' + s.id)} [shape=box, style=filled, fillcolor={_q(color)}, "
                     f"label={label}];")
        lines.append(f"  {_q('s:' + s.id)} -> {_q('n:' + s.node)} [style=dashed, arrowhead=none];")
    for a in net.arcs:
        color, note = style("arc", a.id)
        label = _q(a.id + "\\n" + note)
        lines.append(f"  {_q('n:' + a.source)} -> {_q('n:' + a.target)} [color={_q(color)}, "
                     f"penwidth=3, label={label}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


# --- JSON -------------------------------------------------------------------------

def network_from_dict(data):
    try:
        nodes = tuple(str(n) for n in data["nodes"])
        arcs = tuple(Arc(str(a["id"]), str(a["from"]), str(a["to"]), float(a["capacity"]))
                     for a in data.get("arcs", []))
        sups = tuple(Supplier(str(s["id"]), str(s["node"]), float(s["capacity"]))
                     for s in data.get("suppliers", []))
        dems = tuple(Demand(str(d["id"]), str(d["node"]), bool(d.get("uncertain", True)),
                            None if d.get("fixed_value") is None else float(d["fixed_value"]))
                     for d in data.get("demands", []))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"network JSON malformed: {exc!r}") from None
    return NetworkModel(nodes, arcs, sups, dems, str(data.get("name", "")), str(data.get("note", "")))


def network_to_dict(net):
    out = {}
    if net.name:
        out["name"] = net.name
    if net.note:
        out["note"] = net.note
    out["nodes"] = list(net.nodes)
    out["arcs"] = [{"id": a.id, "from": a.source, "to": a.target, "capacity": a.capacity}
                   for a in net.arcs]
    out["suppliers"] = [{"id": s.id, "node": s.node, "capacity": s.capacity}
                        for s in net.suppliers]
    dem = []
    for d in net.demands:
        row = {"id": d.id, "node": d.node, "uncertain": d.uncertain}
        if not d.uncertain:
            row["fixed_value"] = d.fixed_value
        dem.append(row)
    out["demands"] = dem
    return out


def load_network(path):
    with open(Path(path), encoding="utf-8") as fh:
        try:
            return network_from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from None
