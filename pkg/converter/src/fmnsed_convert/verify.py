"""Cross-runtime parity: source torch model vs the inference toolkit.

Both runtimes consume identical random mel inputs; the toolkit is driven
through its CLI (`fmnsed forward`) and FMNW files only. On divergence the
torch side dumps per-layer activations and the toolkit's `--debug-compare`
flag names the first divergent layer.
"""

from __future__ import annotations

import re
import subprocess
import tempfile
from pathlib import Path

import numpy as np
import torch

from .convert import load_state_dict
from .fmnw import read_fmnw, write_fmnw
from .torch_ref import SedModel

DIVERGENCE_TOL = 1e-3


class VerificationError(RuntimeError):
    def __init__(self, message: str, report: dict):
        super().__init__(message)
        self.report = report


def _run_forward(model_name, fmnw_path, mel_paths, out_dir, debug_compare=None):
    cmd = ["fmnsed", "forward", model_name, "--weights", str(fmnw_path),
           "--mel", *[str(p) for p in mel_paths], "--out-dir", str(out_dir)]
    if debug_compare:
        cmd += ["--debug-compare", str(debug_compare)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise VerificationError(
            f"fmnsed forward failed (exit {proc.returncode}): {proc.stderr.strip()}",
            {"stderr": proc.stderr})
    return proc.stdout


def _first_divergent_layer(model, mel, model_name, fmnw_path, workdir) -> str:
    dump_dir = Path(workdir) / "torch_acts"
    dump_dir.mkdir(exist_ok=True)
    trace: dict = {}
    with torch.no_grad():
        model.frame_probs(torch.from_numpy(mel).unsqueeze(0), trace=trace)
    trace["mel"] = torch.from_numpy(mel)
    for key, val in trace.items():
        write_fmnw(dump_dir / f"{key}.fmnw", {"act": val.numpy()})
    mel_path = Path(workdir) / "divergent_mel.fmnw"
    write_fmnw(mel_path, {"mel": mel})
    out = _run_forward(model_name, fmnw_path, [mel_path],
                       Path(workdir) / "divergent_out", debug_compare=dump_dir)
    m = re.search(r"DEBUG-COMPARE FIRST-DIVERGENT (\S+) (\S+)", out)
    if m:
        return f"{m.group(1)} (max abs diff {m.group(2)})"
    return "unlocated (per-layer comparison reported OK)"


def verify(src_checkpoint, model_name: str, fmnw_path, n_probe_audio: int = 10,
           seed: int = 0, tol: float = DIVERGENCE_TOL) -> dict:
    """Max absolute frame-probability difference over n_probe_audio mels.

    Raises VerificationError naming the first divergent layer when the
    difference exceeds `tol`.
    """
    model = SedModel(model_name)
    model.load_state_dict(load_state_dict(src_checkpoint))
    model.eval()

    rng = np.random.default_rng(seed)
    mels = [rng.normal(scale=1.0, size=(1, 128, 1000)).astype(np.float32)
            for _ in range(n_probe_audio)]

    with tempfile.TemporaryDirectory() as tmp:
        tmp_path = Path(tmp)
        mel_paths = []
        for i, mel in enumerate(mels):
            p = tmp_path / f"probe{i:03d}.fmnw"
            write_fmnw(p, {"mel": mel})
            mel_paths.append(p)
        out_dir = tmp_path / "probs"
        _run_forward(model_name, fmnw_path, mel_paths, out_dir)

        per_mel = []
        for i, mel in enumerate(mels):
            with torch.no_grad():
                ref = model.frame_probs(torch.from_numpy(mel).unsqueeze(0)).numpy()
            got = read_fmnw(out_dir / f"probe{i:03d}.probs.fmnw")["probs"]
            per_mel.append(float(np.max(np.abs(got.astype(np.float64)
                                               - ref.astype(np.float64)))))
        max_diff = max(per_mel)
        report = {
            "model": model_name,
            "n_probe": n_probe_audio,
            "max_abs_diff": max_diff,
            "per_mel": per_mel,
            "tol": tol,
            "ok": max_diff < tol,
        }
        if not report["ok"]:
            worst = int(np.argmax(per_mel))
            layer = _first_divergent_layer(model, mels[worst], model_name,
                                           fmnw_path, tmp_path)
            report["first_divergent_layer"] = layer
            raise VerificationError(
                f"probability divergence {max_diff:.3e} exceeds {tol:.0e}; "
                f"first divergent layer: {layer}", report)
    return report
