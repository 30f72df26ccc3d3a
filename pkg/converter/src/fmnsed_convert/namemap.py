"""Ordered mapping rules from torch checkpoint names to FMNW names.

Rules are derived by walking the target inventory (the authoritative list
of FMNW names and shapes, produced by `fmnsed profile --inventory`), so
every FMNW name is produced exactly once. Three transforms cover the
format differences:

  copy       direct tensor copy
  bn_fold    batch-norm (weight, bias, running_mean, running_var) folded
             into a per-channel scale or shift
  slice_rows row range of a fused tensor (torch GRU gate order is r, z, n)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BN_EPS = 1e-5
GRU_GATE_ORDER = ("r", "z", "n")


class MappingError(ValueError):
    pass


@dataclass(frozen=True)
class MapRule:
    target: str
    transform: str  # copy | bn_scale | bn_shift | slice_rows
    sources: tuple[str, ...]
    params: dict = field(default_factory=dict)

    def apply(self, state: dict) -> np.ndarray:
        tensors = [np.asarray(state[s].detach().cpu().numpy()
                              if hasattr(state[s], "detach") else state[s],
                              dtype=np.float32) for s in self.sources]
        if self.transform == "copy":
            return tensors[0]
        if self.transform == "bn_scale":
            gamma, var = tensors
            return (gamma / np.sqrt(var + self.params["eps"])).astype(np.float32)
        if self.transform == "bn_shift":
            gamma, beta, mean, var = tensors
            scale = gamma / np.sqrt(var + self.params["eps"])
            return (beta - mean * scale).astype(np.float32)
        if self.transform == "slice_rows":
            lo, hi = self.params["rows"]
            return tensors[0][lo:hi]
        raise MappingError(f"unknown transform {self.transform!r}")


def _bn_rules(fmnw_prefix: str, torch_prefix: str) -> list[MapRule]:
    w, b = f"{torch_prefix}.weight", f"{torch_prefix}.bias"
    m, v = f"{torch_prefix}.running_mean", f"{torch_prefix}.running_var"
    return [
        MapRule(f"{fmnw_prefix}.scale", "bn_scale", (w, v), {"eps": BN_EPS}),
        MapRule(f"{fmnw_prefix}.shift", "bn_shift", (w, b, m, v), {"eps": BN_EPS}),
    ]


def _linear_rules(fmnw_prefix: str, torch_prefix: str, bias: bool = True) -> list[MapRule]:
    rules = [MapRule(f"{fmnw_prefix}.w", "copy", (f"{torch_prefix}.weight",))]
    if bias:
        rules.append(MapRule(f"{fmnw_prefix}.b", "copy", (f"{torch_prefix}.bias",)))
    return rules


def _attn_rules(fmnw_prefix: str, torch_prefix: str) -> list[MapRule]:
    rules = []
    for name in ("q", "k", "v", "out"):
        rules += _linear_rules(f"{fmnw_prefix}.{name}", f"{torch_prefix}.{name}")
    return rules


def _gru_rules(fmnw_prefix: str, torch_prefix: str, h: int) -> list[MapRule]:
    rules = []
    for direction, suffix in (("fwd", ""), ("bwd", "_reverse")):
        base = f"{fmnw_prefix}.{direction}"
        for gi, gate in enumerate(GRU_GATE_ORDER):
            rows = {"rows": (gi * h, (gi + 1) * h)}
            rules += [
                MapRule(f"{base}.w_{gate}", "slice_rows",
                        (f"{torch_prefix}.weight_ih_l0{suffix}",), rows),
                MapRule(f"{base}.u_{gate}", "slice_rows",
                        (f"{torch_prefix}.weight_hh_l0{suffix}",), rows),
                MapRule(f"{base}.b_i{gate}", "slice_rows",
                        (f"{torch_prefix}.bias_ih_l0{suffix}",), rows),
                MapRule(f"{base}.b_h{gate}", "slice_rows",
                        (f"{torch_prefix}.bias_hh_l0{suffix}",), rows),
            ]
    return rules


def build_namemap(inventory: dict[str, tuple]) -> list[MapRule]:
    """One rule per inventory entry, ordered like the inventory."""
    rules: dict[str, MapRule] = {}

    def add(rule_list):
        for r in rule_list:
            rules[r.target] = r

    seq_blocks = sorted({name.split(".")[1] for name in inventory
                         if name.startswith("seq.block")})
    for sb in seq_blocks:
        i = sb.removeprefix("block")
        fp, tp = f"seq.{sb}", f"seq.{i}"
        if f"{fp}.gru.fwd.w_r" in inventory:
            h = inventory[f"{fp}.gru.fwd.w_r"][0]
            add(_gru_rules(f"{fp}.gru", f"{tp}.gru", h))
        for ln in ("ln", "ln1", "ln2"):
            if f"{fp}.{ln}.gamma" in inventory:
                add([MapRule(f"{fp}.{ln}.gamma", "copy", (f"{tp}.{ln}.weight",)),
                     MapRule(f"{fp}.{ln}.beta", "copy", (f"{tp}.{ln}.bias",))])
        if f"{fp}.attn.q.w" in inventory:
            add(_attn_rules(f"{fp}.attn", f"{tp}.attn"))
        for fc in ("fc1", "fc2"):
            if f"{fp}.ffn.{fc}.w" in inventory:
                add(_linear_rules(f"{fp}.ffn.{fc}", f"{tp}.{fc}"))
        for n in range(8):
            if f"{fp}.conv{n}.w" in inventory:
                add(_linear_rules(f"{fp}.conv{n}", f"{tp}.convs.{n}"))
        if f"{fp}.mamba.in_proj.w" in inventory:
            add([
                MapRule(f"{fp}.mamba.in_proj.w", "copy", (f"{tp}.in_proj.weight",)),
                MapRule(f"{fp}.mamba.dt_bias", "copy", (f"{tp}.dt_bias",)),
                MapRule(f"{fp}.mamba.a_log", "copy", (f"{tp}.a_log",)),
                MapRule(f"{fp}.mamba.d_skip", "copy", (f"{tp}.d_skip",)),
                MapRule(f"{fp}.mamba.norm.gamma", "copy", (f"{tp}.norm_gamma",)),
                MapRule(f"{fp}.mamba.out_proj.w", "copy", (f"{tp}.out_proj.weight",)),
            ])
        for direction, z_mod, h_mod in (("fwd", "zf", "hf"), ("bwd", "zb", "hb")):
            if f"{fp}.mingru.{direction}.w_z" in inventory:
                add([
                    MapRule(f"{fp}.mingru.{direction}.w_z", "copy", (f"{tp}.{z_mod}.weight",)),
                    MapRule(f"{fp}.mingru.{direction}.b_z", "copy", (f"{tp}.{z_mod}.bias",)),
                    MapRule(f"{fp}.mingru.{direction}.w_h", "copy", (f"{tp}.{h_mod}.weight",)),
                    MapRule(f"{fp}.mingru.{direction}.b_h", "copy", (f"{tp}.{h_mod}.bias",)),
                ])
        if f"{fp}.mix.w" in inventory:
            add(_linear_rules(f"{fp}.mix", f"{tp}.mix"))

    add([MapRule("stem.conv.w", "copy", ("backbone.stem_conv.weight",))])
    add(_bn_rules("stem.bn", "backbone.stem_bn"))
    block_ids = sorted({int(name.split(".")[0].removeprefix("block"))
                        for name in inventory
                        if name.startswith("block") and not name.startswith("blocks")})
    for i in block_ids:
        fp, tp = f"block{i}", f"backbone.blocks.{i}"
        if f"{fp}.expand.w" in inventory:
            add([MapRule(f"{fp}.expand.w", "copy", (f"{tp}.expand.weight",))])
            add(_bn_rules(f"{fp}.expand.bn", f"{tp}.expand_bn"))
        add([MapRule(f"{fp}.dw.w", "copy", (f"{tp}.dw.weight",))])
        add(_bn_rules(f"{fp}.dw.bn", f"{tp}.dw_bn"))
        if f"{fp}.se.fc1.w" in inventory:
            add(_linear_rules(f"{fp}.se.fc1", f"{tp}.se.se_fc1"))
            add(_linear_rules(f"{fp}.se.fc2", f"{tp}.se.se_fc2"))
        add([MapRule(f"{fp}.project.w", "copy", (f"{tp}.project.weight",))])
        add(_bn_rules(f"{fp}.project.bn", f"{tp}.project_bn"))
    add([MapRule("final.conv.w", "copy", ("backbone.final_conv.weight",))])
    add(_bn_rules("final.bn", "backbone.final_bn"))
    if "head.down.w" in inventory:
        add(_linear_rules("head.down", "down"))
    add(_linear_rules("head.out", "head"))

    ordered = []
    for target in inventory:
        rule = rules.get(target)
        if rule is None:
            raise MappingError(f"no mapping rule produces FMNW tensor {target!r}")
        ordered.append(rule)
    return ordered
