"""Checkpoint conversion: torch state dict -> FMNW container + JSON report."""

from __future__ import annotations

import json
import subprocess
import tempfile
from pathlib import Path

import numpy as np
import torch

from .fmnw import write_fmnw
from .namemap import build_namemap

IGNORABLE_SUFFIXES = ("num_batches_tracked",)


class ConversionError(RuntimeError):
    def __init__(self, message: str, report: dict):
        super().__init__(message)
        self.report = report


def fetch_inventory(model_name: str) -> dict[str, tuple]:
    """Ask the inference toolkit for the expected tensor inventory."""
    with tempfile.TemporaryDirectory() as tmp:
        inv_path = Path(tmp) / "inventory.json"
        subprocess.run(
            ["fmnsed", "profile", model_name, "--inventory", str(inv_path)],
            check=True, capture_output=True, text=True,
        )
        raw = json.loads(inv_path.read_text())
    return {name: tuple(shape) for name, shape in raw.items()}


def load_state_dict(path) -> dict:
    state = torch.load(path, map_location="cpu", weights_only=True)
    if isinstance(state, dict) and "state_dict" in state:
        state = state["state_dict"]
    return state


def convert(src_checkpoint, model_name: str, out_fmnw,
            inventory: dict[str, tuple] | None = None) -> dict:
    """Map a source checkpoint into FMNW; raise with a full diff on failure.

    The report lists mapped, missing, and shape-mismatched target tensors
    plus source tensors no rule consumed.
    """
    state = load_state_dict(src_checkpoint)
    if inventory is None:
        inventory = fetch_inventory(model_name)
    rules = build_namemap(inventory)

    tensors: dict[str, np.ndarray] = {}
    consumed: set[str] = set()
    missing: list[str] = []
    mismatched: list[dict] = []
    for rule in rules:
        absent = [s for s in rule.sources if s not in state]
        if absent:
            missing.append(rule.target)
            continue
        value = rule.apply(state)
        consumed.update(rule.sources)
        expected = inventory[rule.target]
        if tuple(value.shape) != expected:
            mismatched.append({
                "target": rule.target,
                "got": list(value.shape),
                "expected": list(expected),
            })
            continue
        tensors[rule.target] = value

    unconsumed = sorted(
        k for k in state
        if k not in consumed and not k.endswith(IGNORABLE_SUFFIXES)
    )
    report = {
        "model": model_name,
        "mapped": len(tensors),
        "expected": len(inventory),
        "missing": missing,
        "shape_mismatches": mismatched,
        "unconsumed_sources": unconsumed,
        "ok": not missing and not mismatched,
    }
    if not report["ok"]:
        raise ConversionError(
            f"conversion failed: {len(missing)} missing, "
            f"{len(mismatched)} mis-shaped (see report)", report)
    write_fmnw(out_fmnw, tensors)
    return report
