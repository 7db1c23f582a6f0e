"""First passage times via event-driven frog dynamics.

The engine advances every active frog one lattice step per time unit; a
site's first visit by an active frog activates the frogs sleeping there.
Trajectories come from keyed streams, so the hitting time tau(u, v), the
dynamic first-visit time and the brute-force relay oracle all observe the
same realization and can be cross-checked for exact equality.

Finite-box exactness: with box_radius >= horizon + |source|_1, nothing
outside the box can influence any event up to the horizon, because frogs
move one step per time unit.  The engine refuses smaller boxes unless
``strict=False``, in which case it computes the well-defined finite-box
process (out-of-box sites wake nothing) that the oracle replays exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from heapq import heappop, heappush

import numpy as np

from .environment import Environment, star
from .errors import FrogsimError, GeometryError, SearchCapError
from .lattice import Coords, l1, step_vectors, sub
from .walks import step_codes_np, walk_keys_np


@dataclass(frozen=True)
class HittingTime:
    """Either Finite(time) or censored at a horizon."""

    time: int | None
    horizon: int | None

    @staticmethod
    def finite(k: int, horizon: int | None = None) -> "HittingTime":
        return HittingTime(int(k), horizon)

    @staticmethod
    def censored(horizon: int | None) -> "HittingTime":
        return HittingTime(None, horizon)

    @property
    def is_finite(self) -> bool:
        return self.time is not None

    def __repr__(self):
        if self.is_finite:
            return f"Finite({self.time})"
        return f"CensoredAt({self.horizon})"


@dataclass(frozen=True)
class PassageOutcome:
    value: HittingTime
    witness: tuple[Coords, ...] | None
    horizon: int
    box_radius: int


class ActivationTable:
    """First-visit times and the activation genealogy of one simulation.

    ``visit`` and ``parent`` are dense arrays over the cube of radius
    ``pos_radius`` = |source|_1 + horizon that bounds every reachable
    position.  ``parent`` stores, for each visited site, the flat index of
    the origin of the frog that first stood there (deterministic choice
    among simultaneous arrivals: smallest origin, then smallest frog index).
    """

    def __init__(self, dim: int, source: Coords, horizon: int, pos_radius: int):
        self.dim = dim
        self.source = source
        self.horizon = horizon
        self.pos_radius = pos_radius
        self.side = 2 * pos_radius + 1
        n = self.side**dim
        self.visit = np.full(n, -1, dtype=np.int64)
        self.parent = np.full(n, -1, dtype=np.int64)
        self.awake_trace: list[int] = []
        self.stopped_at: int | None = None

    def flat(self, coords: np.ndarray) -> np.ndarray:
        R, side = self.pos_radius, self.side
        out = np.zeros(coords.shape[0], dtype=np.int64)
        for j in range(self.dim):
            out = out * side + (coords[:, j] + R)
        return out

    def flat_one(self, x: Coords) -> int:
        idx = 0
        for c in x:
            idx = idx * self.side + (c + self.pos_radius)
        return idx

    def unflat(self, idx: int) -> Coords:
        out = []
        for _ in range(self.dim):
            out.append(idx % self.side - self.pos_radius)
            idx //= self.side
        return tuple(reversed(out))

    def contains(self, x: Coords) -> bool:
        return all(-self.pos_radius <= c <= self.pos_radius for c in x)

    def visit_time(self, x: Coords) -> HittingTime:
        if self.contains(x):
            t = int(self.visit[self.flat_one(x)])
            if t >= 0:
                return HittingTime.finite(t, self.horizon)
        return HittingTime.censored(self.horizon)

    def first_visitor_origin(self, x: Coords) -> Coords:
        ht = self.visit_time(x)
        if not ht.is_finite:
            raise FrogsimError(f"site {x} was not visited by the horizon {self.horizon}")
        return self.unflat(int(self.parent[self.flat_one(x)]))

    def genealogy(self, x: Coords) -> list[Coords]:
        """Relay chain source = w_0, ..., w_m = x from the parent pointers."""
        chain = [x]
        cur = x
        while cur != self.source:
            cur = self.first_visitor_origin(cur)
            chain.append(cur)
        chain.reverse()
        return chain

    def to_json(self, env_ref: dict | None = None) -> dict:
        """Debug dump: visit times and genealogy edges of every visited site."""
        visited = np.nonzero(self.visit >= 0)[0]
        rows = []
        for idx in visited.tolist():
            rows.append(
                {
                    "site": list(self.unflat(idx)),
                    "time": int(self.visit[idx]),
                    "parent": list(self.unflat(int(self.parent[idx]))),
                }
            )
        rows.sort(key=lambda r: (r["time"], r["site"]))
        return {
            "source": list(self.source),
            "horizon": self.horizon,
            "stopped_at": self.stopped_at,
            "env": env_ref,
            "visits": rows,
        }


def simulate_frogs(
    env: Environment,
    source: Coords,
    horizon: int,
    stop_targets: list[Coords] | None = None,
    strict: bool = True,
    record_trace: bool = False,
) -> ActivationTable:
    """Run the activation dynamics from ``source`` up to ``horizon`` steps.

    Frogs woken at time s follow their stream from their own origin with
    step counter k = t - s.  If ``stop_targets`` is given, the loop ends as
    soon as every target has been visited (recorded times are unaffected).
    """
    d = env.dim
    if env.omega(source) < 1:
        raise FrogsimError(f"source {source} has no frogs to activate")
    src_norm = l1(source)
    if strict and env.box_radius < horizon + src_norm:
        raise GeometryError(
            f"box radius {env.box_radius} < horizon {horizon} + |source|_1 {src_norm}; "
            "finite-box values would not match the infinite lattice"
        )
    table = ActivationTable(d, tuple(source), horizon, src_norm + horizon)
    steps = step_vectors(d)
    seed = env.seed

    src_arr = np.asarray([source], dtype=np.int64)
    src_flat = int(table.flat(src_arr)[0])
    table.visit[src_flat] = 0
    table.parent[src_flat] = src_flat

    count0 = env.omega(source)
    pos = np.repeat(src_arr, count0, axis=0)
    ell = np.arange(1, count0 + 1, dtype=np.int64)
    keys = walk_keys_np(seed, pos, ell)
    birth = np.zeros(count0, dtype=np.int64)
    origin_flat = np.full(count0, src_flat, dtype=np.int64)

    want: np.ndarray | None = None
    if stop_targets is not None:
        # targets outside the reachable cube stay censored; drop them from the stop set
        reachable = [t for t in stop_targets if table.contains(tuple(t))]
        if not reachable:
            table.stopped_at = 0
            return table
        want = table.flat(np.asarray(reachable, dtype=np.int64))
        if np.all(table.visit[want] >= 0):
            table.stopped_at = 0
            return table

    for t in range(1, horizon + 1):
        if record_trace:
            table.awake_trace.append(pos.shape[0])
        k = (t - birth).astype(np.uint64)
        codes = step_codes_np(keys, k, d)
        pos += steps[codes]
        flat = table.flat(pos)
        new_mask = table.visit[flat] < 0
        if new_mask.any():
            nf = flat[new_mask]
            norg = origin_flat[new_mask]
            nell = ell[new_mask]
            order = np.lexsort((nell, norg, nf))
            nf = nf[order]
            norg = norg[order]
            lead = np.ones(nf.shape[0], dtype=bool)
            lead[1:] = nf[1:] != nf[:-1]
            sites = nf[lead]
            table.visit[sites] = t
            table.parent[sites] = norg[lead]

            site_coords = np.stack(
                [(sites // table.side ** (d - 1 - j)) % table.side - table.pos_radius for j in range(d)],
                axis=1,
            )
            counts = env.counts_at(site_coords)
            wake = counts > 0
            if wake.any():
                wake_coords = site_coords[wake]
                wake_counts = counts[wake].astype(np.int64)
                wake_flat = sites[wake]
                total = int(wake_counts.sum())
                rep_coords = np.repeat(wake_coords, wake_counts, axis=0)
                rep_flat = np.repeat(wake_flat, wake_counts)
                starts = np.concatenate([[0], np.cumsum(wake_counts)[:-1]])
                new_ell = np.arange(total, dtype=np.int64) - np.repeat(starts, wake_counts) + 1
                new_keys = walk_keys_np(seed, rep_coords, new_ell)
                pos = np.concatenate([pos, rep_coords])
                keys = np.concatenate([keys, new_keys])
                ell = np.concatenate([ell, new_ell])
                birth = np.concatenate([birth, np.full(total, t, dtype=np.int64)])
                origin_flat = np.concatenate([origin_flat, rep_flat])
        if want is not None and np.all(table.visit[want] >= 0):
            table.stopped_at = t
            break
    return table


def tau(env: Environment, u: Coords, v: Coords, horizon: int) -> HittingTime:
    """First time any frog initially at u stands on v; censored if none.

    Covers the unoccupied-start convention: no frogs at u means no hit.
    """
    if not env.in_box(u):
        raise GeometryError(f"start site {u} outside box of radius {env.box_radius}")
    count = env.omega(u)
    if count < 1:
        return HittingTime.censored(horizon)
    if v == u:
        return HittingTime.finite(0, horizon)
    sites, times = first_hits(env, u, horizon)
    delta = sub(v, u)
    key = _offset_key(delta, horizon)
    if key is None:
        return HittingTime.censored(horizon)
    pos = np.searchsorted(sites, key)
    if pos < sites.shape[0] and sites[pos] == key:
        return HittingTime.finite(int(times[pos]), horizon)
    return HittingTime.censored(horizon)


def _offset_key(delta: Coords, horizon: int) -> int | None:
    """Flat key of an offset within the cube of radius ``horizon``."""
    side = 2 * horizon + 1
    key = 0
    for c in delta:
        if abs(c) > horizon:
            return None
        key = key * side + (c + horizon)
    return key


def first_hits(env: Environment, u: Coords, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """First hitting times of every site reached by u's own frogs.

    Returns sorted flat offset keys (cube of radius ``horizon`` centered at
    u) and the matching times; min over the site's omega(u) walks, k = 0
    included.  Cached per (site, horizon prefix) on the environment.
    """
    count = env.omega(u)
    cache = _hits_cache(env)
    entry = cache.get(u)
    if entry is not None and entry[0] >= horizon:
        h0, sites, times, offs = entry
        if h0 == horizon:
            return sites, times
        # a first hit within h0 steps is a first hit within any horizon >= it
        keep = times <= horizon
        keys = _offset_keys_np(offs[keep], horizon)
        order = np.argsort(keys)
        return keys[order], times[keep][order]
    if count < 1:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    ells = np.arange(1, count + 1, dtype=np.int64)
    keys = walk_keys_np(env.seed, np.repeat([list(u)], count, axis=0), ells)
    counters = np.arange(1, horizon + 1, dtype=np.uint64)
    codes = step_codes_np(
        np.repeat(keys, horizon), np.tile(counters, count), env.dim
    ).reshape(count, horizon)
    steps = step_vectors(env.dim)
    offsets = np.cumsum(steps[codes], axis=1).reshape(count * horizon, env.dim)
    times = np.tile(np.arange(1, horizon + 1, dtype=np.int64), count)
    # prepend the k = 0 self-hit
    offsets = np.concatenate([np.zeros((1, env.dim), dtype=np.int64), offsets])
    times = np.concatenate([[0], times])
    flat = _offset_keys_np(offsets, horizon)
    order = np.lexsort((times, flat))
    flat = flat[order]
    times = times[order]
    offsets = offsets[order]
    lead = np.ones(flat.shape[0], dtype=bool)
    lead[1:] = flat[1:] != flat[:-1]
    sites, hit_times, offs = flat[lead], times[lead], offsets[lead]
    cache[u] = (horizon, sites, hit_times, offs)
    if len(cache) > 200_000:
        cache.clear()
    return sites, hit_times


def _offset_keys_np(offsets: np.ndarray, horizon: int) -> np.ndarray:
    side = 2 * horizon + 1
    out = np.zeros(offsets.shape[0], dtype=np.int64)
    for j in range(offsets.shape[1]):
        out = out * side + (offsets[:, j] + horizon)
    return out


def _hits_cache(env: Environment) -> dict:
    cache = getattr(env, "_first_hits_cache", None)
    if cache is None:
        cache = {}
        setattr(env, "_first_hits_cache", cache)
    return cache


def passage_time(env: Environment, x: Coords, horizon: int, strict: bool = True) -> PassageOutcome:
    """T(0, x): first-visit time of x for the dynamics started at the origin."""
    if not env.conditioned_origin and env.omega((0,) * env.dim) < 1:
        raise FrogsimError("passage_time needs omega(0) >= 1; condition the environment first")
    return passage_between(env, (0,) * env.dim, x, horizon, strict=strict)


def passage_between(
    env: Environment, source: Coords, x: Coords, horizon: int, strict: bool = True
) -> PassageOutcome:
    """T(source, x) with a genealogy witness when finite."""
    table = simulate_frogs(env, source, horizon, stop_targets=[x], strict=strict)
    value = table.visit_time(x)
    witness = tuple(table.genealogy(x)) if value.is_finite else None
    return PassageOutcome(value=value, witness=witness, horizon=horizon, box_radius=env.box_radius)


def passage_time_star(
    env: Environment, x: Coords, horizon: int, search_cap: int | None = None, strict: bool = True
) -> PassageOutcome:
    """T*(0, x) = T(0*, x*) between the occupied sites closest to 0 and x."""
    origin_star = star(env, (0,) * env.dim, search_cap)
    x_star = star(env, x, search_cap)
    if x_star == origin_star:
        return PassageOutcome(HittingTime.finite(0, horizon), (origin_star,), horizon, env.box_radius)
    return passage_between(env, origin_star, x_star, horizon, strict=strict)


def witness_last_relay(env: Environment, x: Coords, horizon: int, strict: bool = True) -> Coords:
    """The occupied site v(x) with T(0*, x) = T(0*, v(x)) + tau(v(x), x)."""
    source = star(env, (0,) * env.dim)
    table = simulate_frogs(env, source, horizon, stop_targets=[x], strict=strict)
    value = table.visit_time(x)
    if not value.is_finite:
        raise FrogsimError(f"passage from {source} to {x} censored at {horizon}; no relay witness")
    return table.first_visitor_origin(x)


def jump_witness_scan(
    env: Environment, x: Coords, horizon: int, t: int, strict: bool = True
) -> bool:
    """Whether the activation genealogy of T(0, x) contains a relay jump >= t.

    Scans consecutive genealogy pairs (v1, v2); the final pair into x only
    counts when x is itself occupied, matching the occupied-relay event.
    """
    origin = (0,) * env.dim
    table = simulate_frogs(env, origin, horizon, stop_targets=[x], strict=strict)
    if not table.visit_time(x).is_finite:
        raise FrogsimError(f"passage to {x} censored at {horizon}; genealogy incomplete")
    chain = table.genealogy(x)
    pairs = list(zip(chain[:-1], chain[1:]))
    if pairs and env.omega(x) < 1:
        # the last hop ends at an unoccupied target: not an occupied relay pair
        pairs.pop()
    return any(l1(sub(b, a)) >= t for a, b in pairs)


# ---------------------------------------------------------------------------
# Brute-force oracle: Dijkstra on the complete relay graph over occupied sites
# ---------------------------------------------------------------------------


def oracle_relay_distances(
    env: Environment, source: Coords, horizon: int, node_cap: int = 300
) -> tuple[dict[Coords, int], dict[Coords, Coords]]:
    """Exact relay-path distances from ``source`` to every occupied box site.

    Edge weight between occupied sites is tau(u, v) at the given horizon;
    label-setting over the complete graph, independent of the dynamics.
    """
    occ = env.occupied_coords()
    if occ.shape[0] > node_cap:
        raise SearchCapError(f"oracle supports at most {node_cap} occupied sites, found {occ.shape[0]}")
    if env.omega(source) < 1:
        return {}, {}
    nodes = {tuple(int(c) for c in row) for row in occ}
    nodes.add(tuple(source))
    dist: dict[Coords, int] = {tuple(source): 0}
    parent: dict[Coords, Coords] = {}
    settled: set[Coords] = set()
    heap: list[tuple[int, Coords]] = [(0, tuple(source))]
    while heap:
        d_u, u = heappop(heap)
        if u in settled or d_u > dist.get(u, 1 << 62):
            continue
        settled.add(u)
        sites, times = first_hits(env, u, horizon)
        for v in nodes:
            if v in settled:
                continue
            key = _offset_key(sub(v, u), horizon)
            if key is None:
                continue
            pos = np.searchsorted(sites, key)
            if pos < sites.shape[0] and sites[pos] == key:
                cand = d_u + int(times[pos])
                if cand <= horizon and cand < dist.get(v, 1 << 62):
                    dist[v] = cand
                    parent[v] = u
                    heappush(heap, (cand, v))
    return dist, parent


def oracle_passage_time(
    env: Environment, source: Coords, x: Coords, horizon: int, node_cap: int = 300
) -> PassageOutcome:
    """Relay-infimum value of T(source, x), censored beyond the horizon."""
    dist, parent = oracle_relay_distances(env, source, horizon, node_cap)
    best: int | None = None
    best_relay: Coords | None = None
    for u, d_u in dist.items():
        sites, times = first_hits(env, u, horizon)
        key = _offset_key(sub(x, u), horizon)
        if key is None:
            continue
        pos = np.searchsorted(sites, key)
        if pos < sites.shape[0] and sites[pos] == key:
            cand = d_u + int(times[pos])
            if cand <= horizon and (best is None or cand < best or (cand == best and u < best_relay)):
                best = cand
                best_relay = u
    if best is None:
        return PassageOutcome(HittingTime.censored(horizon), None, horizon, env.box_radius)
    chain = [x] if x != best_relay else []
    cur = best_relay
    while cur is not None:
        chain.append(cur)
        cur = parent.get(cur)
    chain.reverse()
    return PassageOutcome(HittingTime.finite(best, horizon), tuple(chain), horizon, env.box_radius)


def oracle_all_targets(
    env: Environment, source: Coords, horizon: int, node_cap: int = 300
) -> dict[Coords, int]:
    """Oracle values for every box site reachable within the horizon."""
    dist, _ = oracle_relay_distances(env, source, horizon, node_cap)
    best: dict[Coords, int] = {}
    for u, d_u in dist.items():
        sites, times = first_hits(env, u, horizon)
        ok = d_u + times <= horizon
        for key, t_hit in zip(sites[ok].tolist(), times[ok].tolist()):
            v = _offset_unflat(key, horizon, env.dim)
            v_abs = tuple(a + b for a, b in zip(v, u))
            cand = d_u + t_hit
            if env.in_box(v_abs) and cand < best.get(v_abs, 1 << 62):
                best[v_abs] = cand
    return best


def _offset_unflat(key: int, horizon: int, dim: int) -> Coords:
    side = 2 * horizon + 1
    out = []
    for _ in range(dim):
        out.append(key % side - horizon)
        key //= side
    return tuple(reversed(out))
