import pytest
import torch

from fmnsed_convert.convert import convert
from fmnsed_convert.torch_ref import make_checkpoint


@pytest.fixture(scope="session")
def fmn04_converted(tmp_path_factory):
    """A converted fmn04 checkpoint shared across tests."""
    root = tmp_path_factory.mktemp("fmn04")
    ckpt = root / "fmn04.pt"
    fmnw = root / "fmn04.fmnw"
    torch.save(make_checkpoint("fmn04", seed=1), ckpt)
    report = convert(ckpt, "fmn04", fmnw)
    return {"ckpt": ckpt, "fmnw": fmnw, "report": report}
