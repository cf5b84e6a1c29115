"""Plain-text LP file export and a matching reader (for round-trip checks)."""
from __future__ import annotations

import math

from .errors import InvalidParams
from .milp import INF, Constraint, MilpModel, Var

LINE_WIDTH = 200
SECTIONS = ("maximize", "subject to", "bounds", "generals", "binaries", "end")


def fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _expr(terms) -> list[str]:
    toks = []
    for i, (name, coef) in enumerate(terms):
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        piece = name if mag == 1 else f"{fmt(mag)} {name}"
        if i == 0:
            toks.append(piece if sign == "+" else f"- {piece}")
        else:
            toks.append(f"{sign} {piece}")
    return toks


def _wrap(head: str, toks: list[str]) -> list[str]:
    lines, cur = [], head
    for t in toks:
        if len(cur) + 1 + len(t) > LINE_WIDTH and cur.strip():
            lines.append(cur)
            cur = "   " + t
        else:
            cur = f"{cur} {t}" if cur else t
    lines.append(cur)
    return lines


def _order(model: MilpModel) -> list[Var]:
    seen, order = set(), []
    for name, _ in model.objective:
        if name not in seen:
            seen.add(name)
            order.append(name)
    for con in model.constraints:
        for name, _ in con.terms:
            if name not in seen:
                seen.add(name)
                order.append(name)
    order += [v.name for v in model.variables if v.name not in seen]
    return [model.var(n) for n in order]


def _bound_line(v: Var, orphan: bool) -> str | None:
    if v.kind == "B":
        return None
    lo, hi = v.lb, v.ub
    if lo == 0 and hi == INF:
        return f" {v.name} >= 0" if orphan else None
    if lo == -INF and hi == INF:
        return f" {v.name} free"
    if hi == INF:
        return f" {v.name} >= {fmt(lo)}"
    return f" {fmt(lo)} <= {v.name} <= {fmt(hi)}"


def export_lp(model: MilpModel) -> str:
    used = {n for n, _ in model.objective} | {n for c in model.constraints for n, _ in c.terms}
    lines = [f"\\ Model {model.name}", "Maximize"]
    lines += _wrap(" obj:", _expr(model.objective))
    lines.append("Subject To")
    for con in model.constraints:
        lines += _wrap(f" {con.name}:", _expr(con.terms) + [con.sense, fmt(con.rhs)])
    order = _order(model)
    bounds = [b for b in (_bound_line(v, v.name not in used) for v in order) if b]
    if bounds:
        lines.append("Bounds")
        lines += bounds
    gens = [v.name for v in order if v.kind == "I"]
    bins = [v.name for v in order if v.kind == "B"]
    if gens:
        lines.append("Generals")
        lines += _wrap("", gens)
    if bins:
        lines.append("Binaries")
        lines += _wrap("", bins)
    lines.append("End")
    return "\n".join(lines) + "\n"


def _num(tok: str) -> float:
    t = tok.lower()
    if t in ("inf", "+inf", "infinity"):
        return INF
    if t in ("-inf", "-infinity"):
        return -INF
    return float(tok)


def _is_num(tok: str) -> bool:
    try:
        _num(tok)
        return True
    except ValueError:
        return False


def _parse_expr(toks: list[str]) -> list[tuple[str, float]]:
    terms, sign, coef, i = [], 1.0, None, 0
    while i < len(toks):
        t = toks[i]
        if t in ("+", "-"):
            sign = 1.0 if t == "+" else -1.0
        elif _is_num(t):
            coef = _num(t)
        else:
            terms.append((t, sign * (1.0 if coef is None else coef)))
            sign, coef = 1.0, None
        i += 1
    return terms


def parse_lp(text: str) -> MilpModel:
    name = "model"
    section = None
    chunks: dict[str, list[str]] = {s: [] for s in SECTIONS}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            if line.lower().startswith("\\ model "):
                name = line[8:].strip()
            continue
        low = line.lower()
        if low in SECTIONS or low in ("subject to", "st", "s.t."):
            section = "subject to" if low in ("st", "s.t.") else low
            continue
        if section is None:
            raise InvalidParams(f"text before the objective section: {line!r}")
        chunks[section].append(raw)

    def statements(lines):
        """Group lines into labelled statements; continuation lines lack a label."""
        out = []
        for raw in lines:
            toks = raw.split()
            if toks and toks[0].endswith(":"):
                out.append([toks[0][:-1], toks[1:]])
            elif out:
                out[-1][1].extend(toks)
            else:
                raise InvalidParams(f"unlabelled statement: {raw!r}")
        return out

    objective: list[tuple[str, float]] = []
    for _, toks in statements(chunks["maximize"]):
        objective += _parse_expr(toks)
    order: list[str] = []
    seen: set[str] = set()

    def note(n):
        if n not in seen:
            seen.add(n)
            order.append(n)

    for n, _ in objective:
        note(n)
    cons = []
    for label, toks in statements(chunks["subject to"]):
        k = next(i for i, t in enumerate(toks) if t in ("<=", ">=", "=", "=<", "=>"))
        sense = {"=<": "<=", "=>": ">="}.get(toks[k], toks[k])
        terms = _parse_expr(toks[:k])
        for n, _ in terms:
            note(n)
        cons.append(Constraint(label, tuple(terms), sense, _num(toks[k + 1])))
    lb: dict[str, float] = {}
    ub: dict[str, float] = {}
    for raw in chunks["bounds"]:
        t = raw.split()
        if len(t) == 2 and t[1].lower() == "free":
            note(t[0]); lb[t[0]] = -INF; ub[t[0]] = INF
        elif len(t) == 5:
            note(t[2]); lb[t[2]] = _num(t[0]); ub[t[2]] = _num(t[4])
        elif len(t) == 3 and t[1] == ">=":
            note(t[0]); lb[t[0]] = _num(t[2])
        elif len(t) == 3 and t[1] == "<=":
            note(t[0]); ub[t[0]] = _num(t[2])
        elif len(t) == 3 and t[1] == "=":
            note(t[0]); lb[t[0]] = ub[t[0]] = _num(t[2])
        else:
            raise InvalidParams(f"cannot read bound line {raw!r}")
    kinds: dict[str, str] = {}
    for raw in chunks["generals"]:
        for n in raw.split():
            note(n); kinds[n] = "I"
    for raw in chunks["binaries"]:
        for n in raw.split():
            note(n); kinds[n] = "B"
    variables = []
    for n in order:
        kind = kinds.get(n, "C")
        if kind == "B":
            variables.append(Var(n, 0.0, 1.0, "B"))
        else:
            variables.append(Var(n, lb.get(n, 0.0), ub.get(n, INF), kind))
    return MilpModel(name, tuple(variables), tuple(cons), tuple(objective))
