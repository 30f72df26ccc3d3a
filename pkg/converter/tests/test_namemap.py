import numpy as np
import pytest
import torch
import torch.nn as nn

from fmnsed_convert.namemap import BN_EPS, MappingError, build_namemap
from fmnsed_convert.convert import fetch_inventory


def test_bn_fold_matches_torch_inference():
    torch.manual_seed(0)
    bn = nn.BatchNorm2d(6)
    with torch.no_grad():
        bn.weight.uniform_(0.5, 1.5)
        bn.bias.normal_()
        bn.running_mean.normal_()
        bn.running_var.uniform_(0.5, 2.0)
    bn.eval()
    x = torch.randn(2, 6, 4, 4)
    with torch.no_grad():
        ref = bn(x).numpy()
    gamma = bn.weight.detach().numpy()
    beta = bn.bias.detach().numpy()
    mean = bn.running_mean.numpy()
    var = bn.running_var.numpy()
    scale = gamma / np.sqrt(var + BN_EPS)
    shift = beta - mean * scale
    folded = x.numpy() * scale.reshape(1, -1, 1, 1) + shift.reshape(1, -1, 1, 1)
    np.testing.assert_allclose(folded, ref, atol=1e-5)


def test_gru_slices_reproduce_torch_gates():
    torch.manual_seed(1)
    d, h = 8, 4
    gru = nn.GRU(d, h, bidirectional=True)
    state = {f"seq.0.gru.{k}": v for k, v in gru.state_dict().items()}
    inv = {}
    for direction in ("fwd", "bwd"):
        for g in "rzn":
            inv[f"seq.block0.gru.{direction}.w_{g}"] = (h, d)
        for g in "rzn":
            inv[f"seq.block0.gru.{direction}.u_{g}"] = (h, h)
        for g in "rzn":
            inv[f"seq.block0.gru.{direction}.b_i{g}"] = (h,)
        for g in "rzn":
            inv[f"seq.block0.gru.{direction}.b_h{g}"] = (h,)
    rules = {r.target: r for r in build_namemap(inv)}
    wih = state["seq.0.gru.weight_ih_l0"].numpy()
    got_r = rules["seq.block0.gru.fwd.w_r"].apply(state)
    got_n = rules["seq.block0.gru.fwd.w_n"].apply(state)
    np.testing.assert_array_equal(got_r, wih[0:h])
    np.testing.assert_array_equal(got_n, wih[2 * h : 3 * h])
    wih_rev = state["seq.0.gru.weight_ih_l0_reverse"].numpy()
    got_bwd_z = rules["seq.block0.gru.bwd.w_z"].apply(state)
    np.testing.assert_array_equal(got_bwd_z, wih_rev[h : 2 * h])


@pytest.mark.parametrize("name", ["fmn04", "fmn04+TF:64", "fmn04+BIGRU:64",
                                  "fmn04+MAMBA:64", "fmn04+HYBRID:64",
                                  "fmn04+TCN:64", "fmn04+ATT:64"])
def test_namemap_covers_full_inventory(name):
    inventory = fetch_inventory(name)
    rules = build_namemap(inventory)
    assert [r.target for r in rules] == list(inventory)
    assert len({r.target for r in rules}) == len(inventory)


def test_unmappable_inventory_entry_rejected():
    with pytest.raises(MappingError, match="mystery"):
        build_namemap({"mystery.tensor": (3, 3)})
