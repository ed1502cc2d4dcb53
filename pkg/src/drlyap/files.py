"""Certificate, checkpoint and summary files.

All files are JSON.  Polynomials use ``Polynomial.to_dict`` (``n_vars`` plus
``[exponents, coefficient]`` pairs in graded lex order).  Gram matrices are
stored as their row-major lower triangle.
"""

from __future__ import annotations

import datetime as _dt
import json
from pathlib import Path

import numpy as np

from . import kernels
from .nnlf import MlpLyapunov
from .poly import Polynomial
from .sos import GramCertificate
from .uncertainty import PolyCandidate

CERTIFICATE_FORMAT = "drlyap-certificate/1"
CHECKPOINT_FORMAT = "mlp-lyapunov/1"


class CandidateFileError(OSError):
    pass


def gram_lower(gram: np.ndarray) -> list[float]:
    idx = np.tril_indices(gram.shape[0])
    return [float(v) for v in gram[idx]]


def gram_from_lower(lower, dim: int) -> np.ndarray:
    lower = np.asarray(lower, dtype=np.float64)
    if lower.size != dim * (dim + 1) // 2:
        raise ValueError(f"lower triangle has {lower.size} entries, expected {dim * (dim + 1) // 2}")
    g = np.zeros((dim, dim))
    g[np.tril_indices(dim)] = lower
    return g + np.tril(g, -1).T


def certificate_to_dict(result, config: dict | None = None) -> dict:
    """Serialize a feasible ``SosLyapunovResult``."""
    if not result.feasible:
        raise ValueError("only feasible results carry a certificate")
    constraints = []
    for name, poly, cert in zip(result.constraint_names, result.constraint_polys, result.certificates):
        constraints.append(
            {
                "name": name,
                "polynomial": poly.to_dict(),
                "basis": [list(m) for m in cert.basis],
                "gram_lower": gram_lower(cert.gram),
            }
        )
    return {
        "format": CERTIFICATE_FORMAT,
        "formulation": result.formulation.value,
        "V": result.V.to_dict(),
        "margin": float(result.margin),
        "status": result.status,
        "constraints": constraints,
        "config": config or {},
    }


def certificates_from_dict(data: dict) -> list[tuple[str, Polynomial, GramCertificate]]:
    out = []
    for c in data["constraints"]:
        basis = tuple(tuple(int(e) for e in m) for m in c["basis"])
        out.append((c["name"], Polynomial.from_dict(c["polynomial"]), GramCertificate(basis, gram_from_lower(c["gram_lower"], len(basis)))))
    return out


def write_json(path: str | Path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=False)
        fh.write("\n")


def read_json(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise CandidateFileError(f"no such file: {path}") from exc


def load_candidate(path: str | Path):
    """Load a certificate (polynomial V) or an NN checkpoint by its format tag."""
    data = read_json(path)
    fmt = data.get("format")
    if fmt == CERTIFICATE_FORMAT:
        return PolyCandidate(Polynomial.from_dict(data["V"])), "sos-polynomial"
    if fmt == CHECKPOINT_FORMAT:
        return MlpLyapunov.from_dict(data), "nn-checkpoint"
    raise CandidateFileError(f"{path}: unknown candidate format {fmt!r}")


def summary(command: str, config: dict, result: dict) -> dict:
    """Summary record; the timestamp lives only under ``metadata``."""
    return {
        "command": command,
        "config": config,
        "result": result,
        "metadata": {
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "kernel_backend": kernels.BACKEND,
        },
    }


__all__ = [
    "CERTIFICATE_FORMAT",
    "CHECKPOINT_FORMAT",
    "CandidateFileError",
    "gram_lower",
    "gram_from_lower",
    "certificate_to_dict",
    "certificates_from_dict",
    "write_json",
    "read_json",
    "load_candidate",
    "summary",
]
