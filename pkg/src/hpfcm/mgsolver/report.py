from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

SCHEMA_VERSION = 1

CSV_COLUMNS = ("benchmark", "p", "h", "k", "smoother", "mode", "iterations", "converged",
               "diverged", "rho_max", "t_hierarchy", "t_smoother", "t_iterate")


def contraction_stats(residual_history):
    """Ratios of consecutive residual norms and their maximum."""
    r = np.asarray(residual_history, dtype=float)
    if len(r) < 2:
        raise ValueError("need at least two residuals")
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = r[1:] / r[:-1]
    return rho.tolist(), float(np.max(rho))


@dataclass
class SolveReport:
    iterations: int
    residual_history: list
    converged: bool
    diverged: bool = False
    timings: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def contraction_history(self):
        return contraction_stats(self.residual_history)[0] if len(self.residual_history) > 1 else []

    @property
    def rho_max(self):
        return contraction_stats(self.residual_history)[1] if len(self.residual_history) > 1 else float("nan")

    @property
    def cell(self):
        """Table entry: iteration count, ``*`` if not converged, ``div.`` if diverged."""
        if self.diverged:
            return "div."
        return str(self.iterations) if self.converged else "*"

    def to_dict(self):
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        d["rho_max"] = self.rho_max
        d["contraction_history"] = self.contraction_history
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def csv_row(self, benchmark="", p="", h="", k="", smoother="", mode=""):
        t = self.timings
        return {
            "benchmark": benchmark, "p": p, "h": h, "k": k, "smoother": smoother, "mode": mode,
            "iterations": self.cell, "converged": int(self.converged), "diverged": int(self.diverged),
            "rho_max": f"{self.rho_max:.6g}",
            "t_hierarchy": f"{t.get('hierarchy', 0.0):.4g}",
            "t_smoother": f"{t.get('smoother', 0.0):.4g}",
            "t_iterate": f"{t.get('iterate', 0.0):.4g}",
        }

    def csv_line(self, **kw):
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writerow(self.csv_row(**kw))
        return buf.getvalue()
