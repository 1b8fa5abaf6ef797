"""Render the parametric models as PRISM-language source.

The emitted text mirrors the internal transition templates one-to-one (one
command per template, same action labels, probabilities as exact rationals),
so an external checker run on the exported file analyses the same model the
in-process engine does.
"""

from __future__ import annotations

from .mdp import TemplateModule
from .models import (ModelParams, ParameterError, attacker_done_pc,
                     build_client, build_provider_attacker,
                     build_slice_attacker)
from .rationals import format_rational


def _render_module(module: TemplateModule, title: str) -> list[str]:
    lines = [f"module {title}"]
    for decl in module.variables:
        lines.append(f"  {decl.name} : [{decl.low}..{decl.high}] init {decl.init};")
    lines.append("")
    for t in module.templates:
        if not t.guard_text:
            raise ParameterError(
                f"template for action {t.action!r} carries no PRISM rendering")
        updates = " + ".join(
            f"{format_rational(b.weight)} : {b.update_text}"
            for b in t.branches if b.weight != 0)
        lines.append(f"  [{t.action}] {t.guard_text} -> {updates};")
    lines.append("endmodule")
    return lines


def export_prism(params: ModelParams, attacker: str) -> str:
    """PRISM source for the client composed with one intruder.

    Output is deterministic for fixed parameters. The ``busy`` action is the
    only label shared between the two modules, so PRISM's synchronous
    composition matches the in-process one.
    """
    client = build_client(params)
    if attacker == "slice":
        intruder = build_slice_attacker(params)
    elif attacker == "provider":
        intruder = build_provider_attacker(params)
    else:
        raise ParameterError(f"unknown attacker kind {attacker!r}")

    lines = [
        "mdp",
        "",
        f"// n={params.n} m={params.m} c={params.c} k1={params.k1} k2={params.k2}",
        f"// attacker={attacker}",
        "",
    ]
    lines.extend(_render_module(client, "client"))
    lines.append("")
    lines.extend(_render_module(intruder, "intruder"))
    lines.append("")
    done = attacker_done_pc(params, attacker)
    lines.append(f'label "hacked" = pc_a={done};')
    return "\n".join(lines) + "\n"
