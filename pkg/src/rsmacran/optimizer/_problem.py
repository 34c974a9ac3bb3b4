"""Internal subproblem representation for the rate-gap solver.

Everything here works in scaled units: channels are normalized so the noise
power is 1 (SINRs are unchanged), rates and fronthaul capacities are in
Mbit/s, beamformer entries stay in sqrt(W). Complex beamformer blocks are
embedded as stacked (real, imag) variables; every h^H w term occupies two
rows of one global matrix R so that pair powers, gradients, and curvature
all come from matrix products.

Variable layout: x = [w blocks | stream rates r | block slacks u | SINR vars gamma].
Constraint order: power | rate | QT | fronthaul | block slack | r >= 0 | gamma >= 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SolverError

RATE_SCALE = 1e6          # bit/s per internal rate unit
LN2 = float(np.log(2.0))


@dataclass
class Stream:
    owner: int
    kind: str                       # "p" or "c"
    bs: tuple                       # serving BS indices
    dim: int                        # complex length = L * len(bs)
    w_sl: slice = None
    r_idx: int = -1
    decoders: tuple = ()            # effective decoders (common streams only)


class Structure:
    """Static shape of one subproblem family (streams, pairs, masks, budgets)."""

    def __init__(self, channels, ds, clustering, demand, p_max, c_max,
                 fronthaul_mode: str, delta: float, delta_zero: float):
        if fronthaul_mode not in ("dc", "linear"):
            raise SolverError(f"unknown fronthaul mode {fronthaul_mode!r}")
        self.mode = fronthaul_mode
        self.delta = float(delta)
        self.delta_zero = float(delta_zero)
        B, K, L = channels.num_bs, channels.num_users, channels.antennas_per_bs
        self.B, self.K, self.L = B, K, L
        self.hs = channels.h / np.sqrt(channels.noise_power)   # noise-normalized
        self.tau = channels.bandwidth / RATE_SCALE
        self.p_max = np.asarray(p_max, dtype=float)
        self.c_max = np.asarray(c_max, dtype=float) / RATE_SCALE
        self.des = demand.r_des / RATE_SCALE
        self.ds = ds

        dead_user = [not np.any(channels.h[:, k, :]) for k in range(K)]

        # ---- live streams ----------------------------------------------
        self.streams: list = []
        for k in range(K):
            bs = tuple(int(b) for b in clustering.serving_bs(k, "p"))
            if bs and not dead_user[k] and np.any(self.hs[list(bs), k, :]):
                self.streams.append(Stream(owner=k, kind="p", bs=bs, dim=L * len(bs)))
        for i in range(K):
            if not ds.has_common_stream(i):
                continue
            bs = tuple(int(b) for b in clustering.serving_bs(i, "c"))
            if not bs:
                continue
            eff = tuple(k for k in ds.decoders[i] if not dead_user[k])
            if not eff or any(not np.any(self.hs[list(bs), k, :]) for k in eff):
                continue
            self.streams.append(Stream(owner=i, kind="c", bs=bs, dim=L * len(bs),
                                       decoders=eff))
        ns = len(self.streams)
        self.n_streams = ns

        # ---- variable layout --------------------------------------------
        pos = 0
        for s in self.streams:
            s.w_sl = slice(pos, pos + 2 * s.dim)
            pos += 2 * s.dim
        self.nw = pos
        self.nr = ns
        for j, s in enumerate(self.streams):
            s.r_idx = self.nw + j

        # beamformer blocks, flat-indexed
        self.block_stream = []          # stream index per block
        self.block_bs = []              # BS per block
        self.block_cols = []            # x columns of the block (re+im)
        for j, s in enumerate(self.streams):
            d = s.dim
            for a, b in enumerate(s.bs):
                cols = list(range(s.w_sl.start + a * L, s.w_sl.start + (a + 1) * L))
                cols += list(range(s.w_sl.start + d + a * L,
                                   s.w_sl.start + d + (a + 1) * L))
                self.block_stream.append(j)
                self.block_bs.append(b)
                self.block_cols.append(np.array(cols))
        self.n_blocks = len(self.block_stream)
        self.block_stream = np.array(self.block_stream, dtype=int)
        self.block_bs = np.array(self.block_bs, dtype=int)

        self.nu = self.n_blocks if self.mode == "dc" else 0
        self.block_u_idx = (self.nw + self.nr + np.arange(self.n_blocks)
                            if self.mode == "dc" else None)
        self.ng_offset = self.nw + self.nr + self.nu

        # gamma variables: one per private stream, one per (common, decoder)
        self.qt_list = []               # (stream index, decoding user)
        for j, s in enumerate(self.streams):
            if s.kind == "p":
                self.qt_list.append((j, s.owner))
        for j, s in enumerate(self.streams):
            if s.kind == "c":
                for k in s.decoders:
                    self.qt_list.append((j, k))
        self.ng = len(self.qt_list)
        self.n = self.ng_offset + self.ng

        # ---- pair matrix R ------------------------------------------------
        relevant = sorted({k for _, k in self.qt_list})
        self.pair_index = {}
        pairs = []
        for j in range(ns):
            for k in relevant:
                self.pair_index[(k, j)] = len(pairs)
                pairs.append((k, j))
        self.npairs = len(pairs)
        self.R = np.zeros((2 * self.npairs, self.nw))
        for p, (k, j) in enumerate(pairs):
            s = self.streams[j]
            phi = self.hs[list(s.bs), k, :].reshape(-1)
            d = s.dim
            self.R[2 * p, s.w_sl.start:s.w_sl.start + d] = phi.real
            self.R[2 * p, s.w_sl.start + d:s.w_sl.stop] = phi.imag
            self.R[2 * p + 1, s.w_sl.start:s.w_sl.start + d] = -phi.imag
            self.R[2 * p + 1, s.w_sl.start + d:s.w_sl.stop] = phi.real

        # ---- QT numerators and interference masks --------------------------
        self.qt_num_pair = np.zeros(self.ng, dtype=int)
        self.qt_mask = np.zeros((self.ng, self.npairs))
        for row, (j, k) in enumerate(self.qt_list):
            s = self.streams[j]
            self.qt_num_pair[row] = self.pair_index[(k, j)]
            if s.kind == "p":
                for j2, s2 in enumerate(self.streams):
                    if j2 == j:
                        continue
                    if s2.kind == "p" or s2.owner not in ds.decodes[k]:
                        self.qt_mask[row, self.pair_index[(k, j2)]] = 1.0
            else:
                interferers = set(ds.common_interferers(s.owner, k))
                for j2, s2 in enumerate(self.streams):
                    if s2.kind == "p" or s2.owner in interferers:
                        self.qt_mask[row, self.pair_index[(k, j2)]] = 1.0
        self.gamma_cols = self.ng_offset + np.arange(self.ng)
        self.qt_rate_cols = np.array([self.streams[j].r_idx for j, _ in self.qt_list],
                                     dtype=int) if self.ng else np.zeros(0, int)

        # all blocks span exactly 2L real coordinates -> flat index matrix
        self.block_colmat = (np.vstack(self.block_cols) if self.n_blocks
                             else np.zeros((0, 2 * L), int))

        # ---- per-BS groupings -----------------------------------------------
        self.bs_w_idx = []
        self.bs_blocks = []
        for b in range(B):
            ids = np.flatnonzero(self.block_bs == b)
            self.bs_blocks.append(ids)
            cols = (np.concatenate([self.block_cols[i] for i in ids])
                    if ids.size else np.zeros(0, int))
            self.bs_w_idx.append(cols)
        self.bs_active = [b for b in range(B) if self.bs_w_idx[b].size]
        self.fthl_bs = list(self.bs_active)
        # map active-BS list position <- block id, for bincount reductions
        self.bs_pos = {b: i for i, b in enumerate(self.bs_active)}
        self.block_bs_pos = np.array([self.bs_pos[b] for b in self.block_bs],
                                     dtype=int) if self.n_blocks else np.zeros(0, int)

        # ---- objective -------------------------------------------------------
        self.E = np.zeros((K, self.nr))
        for j, s in enumerate(self.streams):
            self.E[s.owner, j] = 1.0
        users_live = self.E.any(axis=1)
        self.psi_const = float(np.sum(self.des[~users_live] ** 2))
        self.H0 = np.zeros((self.n, self.n))
        if self.nr:
            self.H0[self.nw:self.nw + self.nr, self.nw:self.nw + self.nr] = \
                (2.0 / K) * self.E.T @ self.E
        self.psi_scale = float(np.mean(self.des ** 2))

        self.m = (len(self.bs_active) + self.ng + self.ng + len(self.fthl_bs)
                  + (self.n_blocks if self.mode == "dc" else 0)
                  + self.nr + self.ng)

    # -- packing helpers ------------------------------------------------------

    def pack_w(self, w) -> np.ndarray:
        xw = np.zeros(self.nw)
        arr = {"p": w.w_p, "c": w.w_c}
        for s in self.streams:
            blk = arr[s.kind][s.owner][list(s.bs), :].reshape(-1)
            xw[s.w_sl.start:s.w_sl.start + s.dim] = blk.real
            xw[s.w_sl.start + s.dim:s.w_sl.stop] = blk.imag
        return xw

    def unpack_w(self, x):
        K, B, L = self.K, self.B, self.L
        w_p = np.zeros((K, B, L), complex)
        w_c = np.zeros((K, B, L), complex)
        for s in self.streams:
            d = s.dim
            blk = (x[s.w_sl.start:s.w_sl.start + d]
                   + 1j * x[s.w_sl.start + d:s.w_sl.stop]).reshape(len(s.bs), L)
            (w_p if s.kind == "p" else w_c)[s.owner][list(s.bs), :] = blk
        return w_p, w_c

    def rates_from(self, x) -> np.ndarray:
        return x[self.nw:self.nw + self.nr].copy()

    def psi_of_rates(self, r: np.ndarray) -> float:
        gap = self.E @ r - self.des
        return float((np.sum(gap ** 2) + self.psi_const) / self.K)

    def block_power(self, x) -> np.ndarray:
        return np.sum(x[self.block_colmat] ** 2, axis=1)


def linearized_fronthaul_terms(u, r, u_tilde, r_tilde):
    """Sum of convexified bilinear terms 1/4[(u+r)^2 - 2(ut-rt)(u-r) + (ut-rt)^2].

    At (u, r) == (u_tilde, r_tilde) this equals sum(u * r) exactly: the
    linearization of the concave half touches the difference-of-squares form.
    """
    u, r = np.asarray(u, float), np.asarray(r, float)
    c = np.asarray(u_tilde, float) - np.asarray(r_tilde, float)
    return float(np.sum(((u + r) ** 2 - 2.0 * c * (u - r) + c ** 2)) / 4.0)


class Subproblem:
    """One convex subproblem: a Structure plus the iteration-dependent data.

    chi is aligned with the QT rows; beta and u_tilde with the flat block
    list; r_tilde with the streams. In linear fronthaul mode beta/u_tilde
    are unused and the fronthaul rows are plain sums of member rates.
    """

    def __init__(self, struct: Structure, chi: np.ndarray,
                 beta: np.ndarray | None = None,
                 u_tilde: np.ndarray | None = None,
                 r_tilde: np.ndarray | None = None,
                 c_cap: np.ndarray | None = None):
        st = struct
        self.s = st
        self.chi = np.asarray(chi, complex)
        self.chi_abs2 = np.abs(self.chi) ** 2
        self.beta = beta
        self.u_tilde = u_tilde
        self.r_tilde = r_tilde
        self.c_cap = st.c_max if c_cap is None else np.asarray(c_cap, float)
        self._co_rate = st.tau / LN2

        ofs = 0
        self.o_pow = ofs
        ofs += len(st.bs_active)
        self.o_rate = ofs
        ofs += st.ng
        self.o_qt = ofs
        ofs += st.ng
        self.o_fthl = ofs
        ofs += len(st.fthl_bs)
        self.o_beta = ofs
        ofs += st.n_blocks if st.mode == "dc" else 0
        self.o_rpos = ofs
        ofs += st.nr
        self.o_gpos = ofs
        ofs += st.ng
        self._m = ofs

        if st.mode == "dc":
            # per-block linearization constant c = u_tilde - r_tilde(stream)
            self._fc = self.u_tilde - self.r_tilde[st.block_stream]

    @property
    def num_variables(self) -> int:
        return self.s.n

    @property
    def num_constraints(self) -> int:
        return self._m

    # -- evaluation ------------------------------------------------------------

    def _pairs(self, x):
        v = self.s.R @ x[:self.s.nw]
        vre, vim = v[0::2], v[1::2]
        return vre, vim, vre ** 2 + vim ** 2

    def surrogate(self, x) -> np.ndarray:
        """QT surrogate 2Re{chi a} - |chi|^2 D per row; equals the SINR at the
        closed-form chi."""
        vre, vim, pw = self._pairs(x)
        are = vre[self.s.qt_num_pair]
        aim = vim[self.s.qt_num_pair]
        D = 1.0 + self.s.qt_mask @ pw
        return 2.0 * (self.chi.real * are - self.chi.imag * aim) - self.chi_abs2 * D

    def cheap_eval(self, x):
        """(psi, constraint values) without gradients, for line searches."""
        st = self.s
        vre, vim, pw = self._pairs(x)
        r = x[st.nw:st.nw + st.nr]
        gam = x[st.ng_offset:]
        f = np.empty(self._m)
        nbs = len(st.bs_active)
        bp = st.block_power(x)
        bs_pow = np.bincount(st.block_bs_pos, weights=bp, minlength=nbs)
        f[self.o_pow:self.o_pow + nbs] = bs_pow - st.p_max[st.bs_active]
        if st.ng:
            f[self.o_rate:self.o_rate + st.ng] = (x[st.qt_rate_cols]
                                                  - self._co_rate * np.log1p(gam))
            are = vre[st.qt_num_pair]
            aim = vim[st.qt_num_pair]
            D = 1.0 + st.qt_mask @ pw
            f[self.o_qt:self.o_qt + st.ng] = (
                gam - 2.0 * (self.chi.real * are - self.chi.imag * aim)
                + self.chi_abs2 * D)
        if st.mode == "dc":
            uu = x[st.block_u_idx]
            rr = x[st.nw + st.block_stream]
            terms = ((uu + rr) ** 2 - 2.0 * self._fc * (uu - rr) + self._fc ** 2) / 4.0
            f[self.o_fthl:self.o_fthl + nbs] = (
                np.bincount(st.block_bs_pos, weights=terms, minlength=nbs)
                - self.c_cap[st.bs_active])
            f[self.o_beta:self.o_beta + st.n_blocks] = self.beta * bp - uu
        else:
            # one block per (stream, BS), so block-level sums are stream sums
            usage = np.bincount(st.block_bs_pos,
                                weights=r[st.block_stream], minlength=nbs)
            f[self.o_fthl:self.o_fthl + nbs] = usage - self.c_cap[st.bs_active]
        f[self.o_rpos:self.o_rpos + st.nr] = -r
        f[self.o_gpos:self.o_gpos + st.ng] = -gam
        return st.psi_of_rates(r), f

    def full_eval(self, x):
        """(psi, f, G, g0, pair data) for one Newton step."""
        st = self.s
        psi, f = self.cheap_eval(x)
        vre, vim, pw = self._pairs(x)
        G = np.zeros((self._m, st.n))
        # power rows
        for i, b in enumerate(st.bs_active):
            G[self.o_pow + i, st.bs_w_idx[b]] = 2.0 * x[st.bs_w_idx[b]]
        # rate rows
        if st.ng:
            gam = x[st.ng_offset:]
            rows = self.o_rate + np.arange(st.ng)
            G[rows, st.qt_rate_cols] = 1.0
            G[rows, st.gamma_cols] = -self._co_rate / (1.0 + gam)
            # qt rows
            rows = self.o_qt + np.arange(st.ng)
            G[rows, st.gamma_cols] = 1.0
            R2 = st.R.reshape(st.npairs, 2, st.nw)
            Rw = vre[:, None] * R2[:, 0, :] + vim[:, None] * R2[:, 1, :]
            Gw = (st.qt_mask * (2.0 * self.chi_abs2)[:, None]) @ Rw
            npair = st.qt_num_pair
            Gw -= 2.0 * (self.chi.real[:, None] * R2[npair, 0, :]
                         - self.chi.imag[:, None] * R2[npair, 1, :])
            G[rows, :st.nw] = Gw
        # fronthaul + slack rows
        if st.mode == "dc":
            uu = x[st.block_u_idx]
            rr = x[st.nw + st.block_stream]
            du = (uu + rr - self._fc) / 2.0
            dr = (uu + rr + self._fc) / 2.0
            frow = self.o_fthl + st.block_bs_pos
            G[frow, st.block_u_idx] = du
            G[frow, st.nw + st.block_stream] = dr
            brow = self.o_beta + np.arange(st.n_blocks)
            G[brow[:, None], st.block_colmat] = \
                (2.0 * self.beta)[:, None] * x[st.block_colmat]
            G[brow, st.block_u_idx] = -1.0
        else:
            G[self.o_fthl + st.block_bs_pos, st.nw + st.block_stream] = 1.0
        # nonnegativity rows
        rows = self.o_rpos + np.arange(st.nr)
        G[rows, st.nw + np.arange(st.nr)] = -1.0
        rows = self.o_gpos + np.arange(st.ng)
        G[rows, st.gamma_cols] = -1.0

        gap = st.E @ x[st.nw:st.nw + st.nr] - st.des
        g0 = np.zeros(st.n)
        g0[st.nw:st.nw + st.nr] = (2.0 / st.K) * (st.E.T @ gap)
        return psi, f, G, g0

    def curvature(self, x, f) -> np.ndarray:
        """sum_i (1/-f_i) * Hess(f_i) over all constraints, dense (n, n)."""
        st = self.s
        H = np.zeros((st.n, st.n))
        diag = np.zeros(st.n)
        w = 1.0 / (-f)
        w_pow = w[self.o_pow:self.o_pow + len(st.bs_active)]
        np.add.at(diag, st.block_colmat.ravel(),
                  np.repeat(2.0 * w_pow[st.block_bs_pos], st.block_colmat.shape[1]))
        if st.ng:
            gam = x[st.ng_offset:]
            diag[st.gamma_cols] += (w[self.o_rate:self.o_rate + st.ng]
                                    * self._co_rate / (1.0 + gam) ** 2)
            # qt curvature through the pair matrix
            omega = st.qt_mask.T @ (2.0 * self.chi_abs2
                                    * w[self.o_qt:self.o_qt + st.ng])
            if np.any(omega):
                Rw = st.R * np.repeat(omega, 2)[:, None]
                H[:st.nw, :st.nw] += Rw.T @ st.R
        if st.mode == "dc":
            cw = 0.5 * w[self.o_fthl + st.block_bs_pos]
            ui = st.block_u_idx
            ri = st.nw + st.block_stream
            diag[ui] += cw
            np.add.at(diag, ri, cw)
            # one block per (stream, BS): the (u, r) index pairs are unique
            H[ui, ri] += cw
            H[ri, ui] += cw
            w_beta = w[self.o_beta:self.o_beta + st.n_blocks]
            np.add.at(diag, st.block_colmat.ravel(),
                      np.repeat(2.0 * self.beta * w_beta, st.block_colmat.shape[1]))
        H[np.arange(st.n), np.arange(st.n)] += diag
        return H

    def psi(self, x) -> float:
        return self.s.psi_of_rates(self.s.rates_from(x))
