"""Bundled browser-kernel model: theory files, invariants, states, scripts."""

from __future__ import annotations

from importlib import resources

from ..parser import TheoryBuilder, parse_pred_text, parse_script_text, parse_state_file

RULE_LABELS = (
    "ui-sends-new-url",
    "ui-sends-switch-tab",
    "kernel-routes-new-url",
    "wam-creates-webapp",
    "kernel-creates-netproc",
    "webapp-requests-fetch",
    "kernel-policy-check-deliver",
    "kernel-policy-drop",
    "netproc-sends-frame",
    "nic-transmit",
    "nic-deliver",
    "netproc-returns-url",
    "kernel-delivers-return",
    "webapp-renders",
    "kernel-switch-tab",
    "change-display",
)

STATE_FILES = {
    "rep": "init-rep.state",
    "two-apps": "init-two-apps.state",
    "two-apps-b": "init-two-apps-b.state",
}


def data_path(name):
    return resources.files(__package__) / name


def _read(name):
    return data_path(name).read_text(encoding="utf-8")


def load_ibos(profile="full"):
    """The bundled theory with its enrichment.

    profile: "full", "broken-switch-tab", or an iterable of rule labels
    restricting the rule set (the signature and equations stay whole).
    """
    tb = TheoryBuilder()
    tb.load_text(_read("signature.thy"), "signature.thy")
    tb.load_text(_read("aux-eqs.thy"), "aux-eqs.thy")
    tb.load_text(_read("delta-r.thy"), "delta-r.thy")
    rules_file = "rules-broken.thy" if profile == "broken-switch-tab" else "rules.thy"
    tb.load_text(_read(rules_file), rules_file)
    theory = tb.build()
    if not isinstance(profile, str):
        wanted = set(profile)
        theory = theory.with_rules([r for r in theory.rules if r.label in wanted])
    return theory


def invariant_suite(theory):
    """All bundled pattern predicates, keyed by name."""
    return parse_pred_text(_read("invariants.pred"), theory, name="invariants.pred")


def initial_state(theory, name="rep"):
    fname = STATE_FILES.get(name, name)
    return parse_state_file(data_path(fname), theory)


def proof_script(name):
    fname = name if name.endswith(".script") else f"{name}.script"
    return parse_script_text(_read(f"proofs/{fname}"), name=fname)
