"""Brute-force verification suites, runnable from the CLI.

Each check recomputes a quantity through an independent route (explicit
successive-cancellation walk, exhaustive assignment enumeration, Monte-Carlo
signal draws, complex grid search) and compares against the library path.
"""
from __future__ import annotations

import itertools

import numpy as np

from .clustering import build_gap, gap_objective, solve_gap
from .model import ChannelState
from .optimizer import compute_chi, linearized_fronthaul_terms, qt_gap_common, qt_gap_private
from .rsma import (Beamformers, DecodingStructure, power_usage, sinr_common,
                   sinr_private)


def _random_instance(rng, B=2, K=3, L=2, sigma2=0.5):
    h = rng.standard_normal((B, K, L)) + 1j * rng.standard_normal((B, K, L))
    ch = ChannelState(h=h, outage_mask=np.zeros((B, K), bool),
                      noise_power=sigma2, bandwidth=1e6)
    w = Beamformers(
        w_p=rng.standard_normal((K, B, L)) + 1j * rng.standard_normal((K, B, L)),
        w_c=rng.standard_normal((K, B, L)) + 1j * rng.standard_normal((K, B, L)))
    ds = DecodingStructure(decoders=[tuple(range(K))] * K,
                           order=[tuple(range(K))] * K)
    return ch, w, ds


def _sic_walk(ch, w, ds, k):
    h_k = ch.aggregate(k)
    K = ch.num_users
    pow_p = [abs(np.vdot(h_k, w.aggregate(j, "p"))) ** 2 for j in range(K)]
    pow_c = [abs(np.vdot(h_k, w.aggregate(j, "c"))) ** 2 for j in range(K)]
    remaining = set(range(K))
    commons = {}
    for i in ds.order[k]:
        interf = ch.noise_power + sum(pow_p)
        interf += sum(pow_c[l] for l in remaining if l != i)
        commons[i] = pow_c[i] / interf
        remaining.discard(i)
    interf = ch.noise_power + sum(pow_p) - pow_p[k]
    interf += sum(pow_c[l] for l in remaining)
    return commons, pow_p[k] / interf


def check_sic(seed: int, instances: int = 100, tol: float = 1e-9):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        ch, w, ds = _random_instance(rng)
        for k in range(ch.num_users):
            commons, private = _sic_walk(ch, w, ds, k)
            err = abs(sinr_private(k, w, ch, ds) - private) / (1 + private)
            worst = max(worst, err)
            for i in ds.decodes[k]:
                err = abs(sinr_common(i, k, w, ch, ds) - commons[i]) / (1 + commons[i])
                worst = max(worst, err)
    return worst <= tol, f"max relative deviation {worst:.2e} (tol {tol:.0e})"


def check_qt_surrogate(seed: int, instances: int = 100, tol: float = 1e-9):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        ch, w, ds = _random_instance(rng)
        chi_p, chi_c = compute_chi(w, ch, ds)
        for k in range(ch.num_users):
            gamma = rng.uniform(0, 5)
            G = sinr_private(k, w, ch, ds)
            g = qt_gap_private(k, w, gamma, chi_p[k], ch, ds)
            worst = max(worst, abs(g - (gamma - G)) / (1 + G))
        for (i, k), chi in chi_c.items():
            gamma = rng.uniform(0, 5)
            G = sinr_common(i, k, w, ch, ds)
            g = qt_gap_common(i, k, w, gamma, chi, ch, ds)
            worst = max(worst, abs(g - (gamma - G)) / (1 + G))
    return worst <= tol, f"max surrogate gap {worst:.2e} (tol {tol:.0e})"


def check_touching_point(seed: int, instances: int = 100, tol: float = 1e-9):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(1, 16))
        u = rng.uniform(0, 1, n)
        r = rng.uniform(0, 12, n)
        lhs = linearized_fronthaul_terms(u, r, u, r)
        ref = float(np.sum(u * r))
        worst = max(worst, abs(lhs - ref) / (1 + abs(ref)))
    return worst <= tol, f"max touching deviation {worst:.2e} (tol {tol:.0e})"


def check_gap_enumeration(seed: int, instances: int = 10):
    rng = np.random.default_rng(seed)
    for i in range(instances):
        B = int(rng.integers(1, 3))
        K = int(rng.integers(1, 4))
        ch, _, ds = _random_instance(rng, B=B, K=K)
        inst = build_gap(ch, ds, int(rng.integers(1, B + 1)),
                         int(rng.integers(1, 2 * K + 1)))
        cl = solve_gap(inst)
        best = -np.inf
        pairs = [(b, k) for b in range(B) for k in range(K)]
        for states in itertools.product((0, 1, 2), repeat=len(pairs)):
            nu_p = np.zeros((B, K), bool)
            nu_c = np.zeros((B, K), bool)
            for (b, k), s in zip(pairs, states):
                if s == 1:
                    nu_p[b, k] = True
                elif s == 2:
                    nu_c[b, k] = True
            if np.any(nu_p.sum(axis=0) > inst.max_bs_per_message):
                continue
            if np.any(nu_c.sum(axis=0) > inst.max_bs_per_message):
                continue
            if np.any(nu_p.sum(axis=1) + nu_c.sum(axis=1) > inst.max_messages_per_bs):
                continue
            best = max(best, float(np.sum(inst.benefit_p[nu_p])
                                   + np.sum(inst.benefit_c[nu_c])))
        if gap_objective(inst, cl) != best:
            return False, f"instance {i}: {gap_objective(inst, cl)} != {best}"
    return True, f"{instances} instances match enumeration exactly"


def check_power_monte_carlo(seed: int, draws: int = 100_000, tol: float = 0.02):
    rng = np.random.default_rng(seed)
    ch, w, _ = _random_instance(rng)
    worst = 0.0
    for b in range(ch.num_bs):
        blocks = np.concatenate([w.w_p[:, b, :], w.w_c[:, b, :]], axis=0)
        s = (rng.standard_normal((draws, blocks.shape[0]))
             + 1j * rng.standard_normal((draws, blocks.shape[0]))) / np.sqrt(2)
        mc = float(np.mean(np.sum(np.abs(s @ blocks) ** 2, axis=1)))
        ref = power_usage(b, w)
        worst = max(worst, abs(mc - ref) / ref)
    return worst <= tol, f"max Monte-Carlo deviation {worst:.2%} (tol {tol:.0%})"


def run_all(seed: int = 0) -> list:
    return [
        ("SINR vs explicit SIC walk", *check_sic(seed)),
        ("QT surrogate reduces to gamma - SINR", *check_qt_surrogate(seed + 1)),
        ("linearized fronthaul touching point", *check_touching_point(seed + 2)),
        ("assignment B&B vs exhaustive enumeration", *check_gap_enumeration(seed + 3)),
        ("BS power vs signal-level Monte-Carlo", *check_power_monte_carlo(seed + 4)),
    ]
