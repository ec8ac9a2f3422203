"""Compiled inner loop of the simulation.

Each site owns six rate slots (hops N, E, S, W, clockwise and
counter-clockwise turns). Per-site totals sit in the leaves of a binary sum
tree whose internal nodes are always recomputed as ``left + right``, so the
tree is a pure function of the slot rates and never drifts. After an event
only the sites whose neighbourhood changed are refreshed.

Selection walks the tree exactly like a linear cumulative walk over
(site-major, slot-minor) order: the chosen slot is the first whose running
sum exceeds ``u * (total + R_Dep_effective)``.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .energetics import motion_kernel, rotation_kernel
from .rng import next_below, next_uniform

N_SLOTS = 6
MOVE_N, MOVE_E, MOVE_S, MOVE_W, ROT_CW, ROT_CCW, DEPOSIT, STALL = range(8)

# counters layout
C_DEPOSIT, C_MOVE, C_ROTATE, C_STALL = range(4)


def tree_size(n_sites: int) -> int:
    m = 1
    while m < n_sites:
        m *= 2
    return m


@njit(cache=True)
def refresh_site(s, species, orient, labels, pair, nbr, E_s, E_r, TT0,
                 rates, acts, tree, m):
    if species[s] == 0:
        for k in range(N_SLOTS):
            rates[s, k] = 0.0
            acts[s, k] = np.nan
    else:
        for d in range(4):
            if species[nbr[s, d]] == 0:
                e = motion_kernel(species, orient, labels, pair, nbr, E_s, s, d)
                acts[s, d] = e
                rates[s, d] = math.exp(-e / TT0)
            else:
                acts[s, d] = np.nan
                rates[s, d] = 0.0
        e = rotation_kernel(species, orient, labels, pair, nbr, E_r, s, 1)
        acts[s, ROT_CW] = e
        rates[s, ROT_CW] = math.exp(-e / TT0)
        e = rotation_kernel(species, orient, labels, pair, nbr, E_r, s, -1)
        acts[s, ROT_CCW] = e
        rates[s, ROT_CCW] = math.exp(-e / TT0)
    leaf = 0.0
    for k in range(N_SLOTS):
        leaf += rates[s, k]
    i = m + s
    tree[i] = leaf
    i //= 2
    while i >= 1:
        tree[i] = tree[2 * i] + tree[2 * i + 1]
        i //= 2


@njit(cache=True)
def refresh_all(species, orient, labels, pair, nbr, E_s, E_r, TT0, rates, acts, tree, m):
    n = species.shape[0]
    for s in range(n):
        refresh_site(s, species, orient, labels, pair, nbr, E_s, E_r, TT0, rates, acts, tree, m)


@njit(cache=True)
def _refresh_around(s, species, orient, labels, pair, nbr, E_s, E_r, TT0, rates, acts, tree, m):
    refresh_site(s, species, orient, labels, pair, nbr, E_s, E_r, TT0, rates, acts, tree, m)
    for k in range(4):
        t = nbr[s, k]
        if species[t] != 0:
            refresh_site(t, species, orient, labels, pair, nbr, E_s, E_r, TT0, rates, acts, tree, m)


@njit(cache=True)
def _take_empty(i, empties, empty_index, n_empty):
    k = empty_index[i]
    last = empties[n_empty - 1]
    empties[k] = last
    empty_index[last] = k
    empty_index[i] = -1
    return n_empty - 1


@njit(cache=True)
def _give_empty(i, empties, empty_index, n_empty):
    empties[n_empty] = i
    empty_index[i] = n_empty
    return n_empty + 1


@njit(cache=True)
def _descend(tree, m, x):
    node = 1
    while node < m:
        left = 2 * node
        if x < tree[left] or tree[left + 1] == 0.0:
            node = left
        else:
            x -= tree[left]
            node = left + 1
    return node - m, x


@njit(cache=True)
def run_steps(n_steps, step0, species, orient, labels, pair, nbr, E_s, E_r, TT0, R_dep,
              max_cov, conc_cum, rates, acts, tree, m, empties, empty_index, state,
              rng, counters, log_kind, log_site, log_act, log_aux, log_on):
    """Advance ``n_steps`` events. ``state[0]`` holds the number of empty sites.

    Returns the number of steps executed; stops early (returning a negative
    count-1 encoded value) only if a deposition is drawn with no empty site.
    """
    n_sites = species.shape[0]
    n_empty = state[0]
    n_species = conc_cum.shape[0]
    conc_total = conc_cum[n_species - 1]
    for it in range(n_steps):
        total = tree[1]
        n_tiles = n_sites - n_empty
        r_eff = R_dep if (n_tiles / n_sites) < max_cov else 0.0
        li = step0 + it
        if total == 0.0 and r_eff == 0.0:
            counters[C_STALL] += 1
            if log_on:
                log_kind[li] = STALL
                log_site[li] = -1
                log_act[li] = np.nan
                log_aux[li] = -1
            continue
        u = next_uniform(rng)
        shoot = u * (total + r_eff)
        if total > 0.0 and (shoot < total or r_eff == 0.0):
            s, x = _descend(tree, m, shoot)
            chosen = -1
            last_pos = -1
            cum = 0.0
            for k in range(N_SLOTS):
                r = rates[s, k]
                if r > 0.0:
                    last_pos = k
                cum += r
                if cum > x:
                    chosen = k
                    break
            if chosen == -1:
                chosen = last_pos
            if log_on:
                log_kind[li] = chosen
                log_site[li] = s
                log_act[li] = acts[s, chosen]
                log_aux[li] = -1
            if chosen < 4:
                t = nbr[s, chosen]
                species[t] = species[s]
                orient[t] = orient[s]
                species[s] = 0
                orient[s] = 0
                n_empty = _take_empty(t, empties, empty_index, n_empty)
                n_empty = _give_empty(s, empties, empty_index, n_empty)
                _refresh_around(s, species, orient, labels, pair, nbr, E_s, E_r, TT0,
                                rates, acts, tree, m)
                _refresh_around(t, species, orient, labels, pair, nbr, E_s, E_r, TT0,
                                rates, acts, tree, m)
                counters[C_MOVE] += 1
            else:
                sense = 1 if chosen == ROT_CW else -1
                orient[s] = (orient[s] + sense + 4) % 4
                _refresh_around(s, species, orient, labels, pair, nbr, E_s, E_r, TT0,
                                rates, acts, tree, m)
                counters[C_ROTATE] += 1
        else:
            if n_empty == 0:
                state[0] = n_empty
                return -(it + 1)
            idx = next_below(rng, n_empty)
            s = empties[idx]
            v = next_uniform(rng) * conc_total
            sp = n_species
            for k in range(n_species):
                if conc_cum[k] > v:
                    sp = k + 1
                    break
            o = next_below(rng, 4)
            species[s] = sp
            orient[s] = o
            n_empty = _take_empty(s, empties, empty_index, n_empty)
            _refresh_around(s, species, orient, labels, pair, nbr, E_s, E_r, TT0,
                            rates, acts, tree, m)
            counters[C_DEPOSIT] += 1
            if log_on:
                log_kind[li] = DEPOSIT
                log_site[li] = s
                log_act[li] = np.nan
                log_aux[li] = sp * 4 + o
    state[0] = n_empty
    return n_steps
