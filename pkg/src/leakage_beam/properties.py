"""Randomized invariant checks for both precoders.

Every instance draws a fresh channel set and, for every user, verifies the
diagonalization identities, the spectrum relation between the two schemes,
SLNR values, stream margins and the structure of the matched-filter output.
Results are counted per check so the CLI can print a pass/fail table.
"""

from __future__ import annotations

import itertools
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .channel import SystemDims, draw_channel_set, substream
from .metrics import approx_stream_sinr, matched_filter, stream_margins_db
from .precoders import (
    build_pair,
    ged_diagonalize,
    original_precoder,
    proposed_precoder,
    simultaneous_diagonalize,
    slnr_value,
)

__all__ = ["CheckTally", "PropertyReport", "instance_grid", "check_instance", "check_properties"]

STREAM_COUNTS = (1, 2, 3)
NOISE_VARIANCES = (1e-3, 1e-1, 1.0, 10.0)
# Pairs closer than this (relative) are treated as ties and skip strict checks.
TIE_RTOL = 1e-6


@dataclass
class CheckTally:
    passed: int = 0
    failed: int = 0
    worst: float = 0.0

    def record(self, ok, value=0.0):
        if ok:
            self.passed += 1
        else:
            self.failed += 1
        self.worst = max(self.worst, float(value))


@dataclass
class PropertyReport:
    instances: int = 0
    checks: "OrderedDict[str, CheckTally]" = field(default_factory=OrderedDict)

    def tally(self, name):
        return self.checks.setdefault(name, CheckTally())

    @property
    def ok(self):
        return all(t.failed == 0 for t in self.checks.values())

    def format(self):
        width = max(len(n) for n in self.checks) if self.checks else 0
        lines = [f"{self.instances} random instances"]
        for name, t in self.checks.items():
            status = "PASS" if t.failed == 0 else "FAIL"
            lines.append(
                f"{status}  {name:<{width}}  passed={t.passed} failed={t.failed} worst={t.worst:.3e}"
            )
        return "\n".join(lines)


def _fro(X):
    return float(np.linalg.norm(X))


def _rel(value, scale):
    return value / scale if scale > 0 else value


def instance_grid(n_instances, N=8, M=3, K=2):
    """``(dims, noise_variance)`` for each instance, cycling over L and sigma^2."""
    combos = list(itertools.product(STREAM_COUNTS, NOISE_VARIANCES))
    out = []
    for i in range(n_instances):
        L, s2 = combos[i % len(combos)]
        out.append((SystemDims(N, M, K, min(L, M)), s2))
    return out


def check_instance(cs, report):
    """Add every check for every user of ``cs`` to ``report``."""
    d = cs.dims
    N, M, L = d.N, d.M, d.L
    for k in range(1, d.K + 1):
        A, B = build_pair(cs, k)
        nA, nB = _fro(A), _fro(B)

        T, lam = ged_diagonalize(A, B)
        r = _rel(_fro(T.conj().T @ A @ T - np.diag(lam)), nA)
        report.tally("ged: T^H A T = diag(lambda)").record(r <= 1e-8, r)
        r = _fro(T.conj().T @ B @ T - np.eye(N))
        report.tally("ged: T^H B T = I").record(r <= 1e-8 * N, r / N)

        P, theta, omega = simultaneous_diagonalize(A, B)
        r = _rel(_fro(P.conj().T @ A @ P - np.diag(theta)), nA)
        report.tally("pair: P^H A P = diag(theta)").record(r <= 1e-8, r)
        r = _rel(_fro(P.conj().T @ B @ P - np.diag(omega)), nB)
        report.tally("pair: P^H B P = diag(omega)").record(r <= 1e-8, r)
        r = float(np.max(np.abs(theta + omega - 1.0)))
        report.tally("pair: theta + omega = 1").record(r <= 1e-10, r)

        top, tail = theta[:M], theta[M:]
        ordered = bool(np.all(np.diff(theta) <= 0) and np.all(np.diff(omega) >= 0))
        pattern = bool(top[0] < 1 and top[-1] > 0 and np.all(np.abs(tail) <= 1e-10))
        worst_tail = float(np.max(np.abs(tail))) if tail.size else 0.0
        report.tally("pair: theta order and rank pattern").record(ordered and pattern, worst_tail)

        ratio = theta[:M] / omega[:M]
        gap = np.abs(lam[:M] - ratio) / np.maximum(1.0, lam[:M])
        tail_ok = bool(np.all(lam[M:] <= 1e-10) and np.all(theta[M:] <= 1e-10))
        r = float(np.max(gap))
        report.tally("spectrum: lambda = theta / omega").record(r <= 1e-8 and tail_ok, r)

        po = original_precoder(cs, k)
        pp = proposed_precoder(cs, k)
        for p in (po, pp):
            r = abs(np.real(np.trace(p.matrix @ p.matrix.conj().T)) - L) / L
            report.tally("power: Tr(F F^H) = L").record(r <= 1e-10, r)

        s_orig = slnr_value(cs, k, po.matrix)
        s_prop = slnr_value(cs, k, pp.matrix)
        want = np.sum(lam[:L]) / L
        r = abs(s_orig - want) / want
        report.tally("slnr: original = sum(lambda)/L").record(r <= 1e-8, r)
        want = np.sum(theta[:L]) / np.sum(1.0 - theta[:L])
        r = abs(s_prop - want) / want
        report.tally("slnr: proposed = sum(theta)/sum(omega)").record(r <= 1e-8, r)
        report.tally("slnr: proposed <= original").record(
            s_prop <= s_orig * (1 + 1e-12), max(s_prop / s_orig - 1, 0.0)
        )

        for p, label in ((po, "original"), (pp, "proposed")):
            G = matched_filter(cs, p).matrix
            Hk = cs.channels[k - 1]
            out = G @ Hk @ p.matrix
            want = p.scale**2 * np.diag(p.stream_gains)
            r = _rel(_fro(out - want), _fro(want))
            report.tally(f"isi-free: G H F diagonal ({label})").record(r <= 1e-8, r)
            if label == "proposed":
                r = _rel(_fro(G @ G.conj().T - want), _fro(want))
                report.tally("mf noise: G' G'^H = gamma^2 diag(theta)").record(r <= 1e-8, r)

        if L >= 2:
            d_orig = stream_margins_db(approx_stream_sinr(po, cs.noise_variance))
            d_prop = stream_margins_db(approx_stream_sinr(pp, cs.noise_variance))
            ident = max(
                float(np.max(np.abs(d_prop - stream_margins_db(theta[:L])))),
                float(np.max(np.abs(d_orig - stream_margins_db(lam[:L])))),
            )
            report.tally("margins: identity with theta and lambda").record(ident <= 1e-10, ident)
            strict = True
            for l, m in itertools.combinations(range(L), 2):
                if abs(lam[l] - lam[m]) <= TIE_RTOL * max(lam[l], lam[m]):
                    continue
                # Stream m is the weaker one; compare magnitudes of the gap.
                strict &= abs(d_prop[m, l]) < abs(d_orig[m, l])
            report.tally("margins: balanced gap < original gap").record(strict)
            if abs(lam[0] - lam[L - 1]) > TIE_RTOL * lam[0]:
                report.tally("slnr: strict relaxation for L >= 2").record(s_prop < s_orig)


def check_properties(n_instances=200, seed=0, N=8, M=3, K=2):
    """Run :func:`check_instance` on ``n_instances`` random channel sets."""
    report = PropertyReport()
    for i, (dims, s2) in enumerate(instance_grid(n_instances, N, M, K)):
        cs = draw_channel_set(dims, s2, substream(seed, i))
        check_instance(cs, report)
        report.instances += 1
    return report
