"""Compiled inner loops over neighbour tables.

Every kernel takes a neighbour table ``nbr`` (V, 4) with matching edge ids
``eid`` and a per-edge ``state``; an adjacency is usable when
``state[eid] == want`` (1 for open primal moves, 0 for closed dual moves).
"""
import numpy as np
from numba import njit


@njit(cache=True)
def bfs(nbr, eid, state, want, allowed, sources):
    nv = nbr.shape[0]
    dist = np.full(nv, -1, np.int64)
    parent = np.full(nv, -1, np.int64)
    queue = np.empty(nv, np.int64)
    head = 0
    tail = 0
    for s in sources:
        if allowed[s] and dist[s] < 0:
            dist[s] = 0
            queue[tail] = s
            tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        for d in range(4):
            v = nbr[u, d]
            if v < 0 or dist[v] >= 0 or not allowed[v]:
                continue
            if state[eid[u, d]] != want:
                continue
            dist[v] = dist[u] + 1
            parent[v] = u
            queue[tail] = v
            tail += 1
    return dist, parent


@njit(cache=True)
def _find(parent, a):
    root = a
    while parent[root] != root:
        root = parent[root]
    while parent[a] != root:
        nxt = parent[a]
        parent[a] = root
        a = nxt
    return root


@njit(cache=True)
def union_find_labels(nbr, eid, state, want, allowed):
    """Component labels (smallest member id) for allowed vertices, -1 elsewhere."""
    nv = nbr.shape[0]
    parent = np.arange(nv)
    for u in range(nv):
        if not allowed[u]:
            continue
        for d in range(2):  # east and north suffice to see every adjacency once
            v = nbr[u, d]
            if v < 0 or not allowed[v] or state[eid[u, d]] != want:
                continue
            ru = _find(parent, u)
            rv = _find(parent, v)
            if ru != rv:
                if ru < rv:
                    parent[rv] = ru
                else:
                    parent[ru] = rv
    labels = np.full(nv, -1, np.int64)
    for u in range(nv):
        if allowed[u]:
            labels[u] = _find(parent, u)
    return labels


# ---------------------------------------------------------------------------
# vertex-disjoint paths by unit-capacity vertex splitting


@njit(cache=True)
def _add_arc(heads, nxt, to, cap, m, a, b, c):
    to[m] = b
    cap[m] = c
    nxt[m] = heads[a]
    heads[a] = m
    to[m + 1] = a
    cap[m + 1] = 0
    nxt[m + 1] = heads[b]
    heads[b] = m + 1
    return m + 2


@njit(cache=True)
def disjoint_paths(nbr, eid, state, want, allowed, sources, target_id, target_cap, max_flow):
    """Maximum number (capped at ``max_flow``) of vertex-disjoint usable paths.

    Each source vertex starts at most one path.  A vertex with
    ``target_id >= 0`` is terminal: a path entering it stops there and counts
    against ``target_cap[target_id]``.  Returns (flow, paths) where paths[i]
    lists the vertices of the path started at sources[i] (-1 padded), empty if
    the source carries no flow.
    """
    nv = nbr.shape[0]
    nt = target_cap.shape[0]
    S = 2 * nv + nt
    T = S + 1
    nnodes = T + 1
    max_arcs = 2 * (nv + 4 * nv + sources.shape[0] + nt + nv)
    heads = np.full(nnodes, -1, np.int64)
    nxt = np.empty(max_arcs, np.int64)
    to = np.empty(max_arcs, np.int64)
    cap = np.empty(max_arcs, np.int64)
    m = 0
    for v in range(nv):
        if not allowed[v]:
            continue
        t = target_id[v]
        if t >= 0:
            m = _add_arc(heads, nxt, to, cap, m, 2 * v, 2 * nv + t, 1)
            continue
        m = _add_arc(heads, nxt, to, cap, m, 2 * v, 2 * v + 1, 1)
        for d in range(4):
            u = nbr[v, d]
            if u < 0 or not allowed[u] or state[eid[v, d]] != want:
                continue
            m = _add_arc(heads, nxt, to, cap, m, 2 * v + 1, 2 * u, 1)
    src_arc = np.full(sources.shape[0], -1, np.int64)
    for i in range(sources.shape[0]):
        s = sources[i]
        if allowed[s]:
            src_arc[i] = m
            m = _add_arc(heads, nxt, to, cap, m, S, 2 * s, 1)
    for t in range(nt):
        m = _add_arc(heads, nxt, to, cap, m, 2 * nv + t, T, target_cap[t])

    flow = 0
    prev_arc = np.full(nnodes, -1, np.int64)
    seen = np.zeros(nnodes, np.bool_)
    queue = np.empty(nnodes, np.int64)
    while flow < max_flow:
        seen[:] = False
        seen[S] = True
        queue[0] = S
        head = 0
        tail = 1
        found = False
        while head < tail and not found:
            a = queue[head]
            head += 1
            k = heads[a]
            while k >= 0:
                b = to[k]
                if cap[k] > 0 and not seen[b]:
                    seen[b] = True
                    prev_arc[b] = k
                    if b == T:
                        found = True
                        break
                    queue[tail] = b
                    tail += 1
                k = nxt[k]
        if not found:
            break
        b = T
        while b != S:
            k = prev_arc[b]
            cap[k] -= 1
            cap[k ^ 1] += 1
            b = to[k ^ 1]
        flow += 1

    paths = np.full((sources.shape[0], nv + 1), -1, np.int64)
    for i in range(sources.shape[0]):
        k0 = src_arc[i]
        if k0 < 0 or cap[k0] != 0:
            continue
        node = 2 * sources[i]
        j = 0
        while True:
            v = node // 2
            paths[i, j] = v
            j += 1
            if target_id[v] >= 0:
                break
            # leave v_out along a forward arc that carries flow
            node_out = 2 * v + 1
            k = heads[node_out]
            nxt_node = -1
            while k >= 0:
                if (k & 1) == 0 and cap[k] == 0 and to[k] < 2 * nv:
                    nxt_node = to[k]
                    cap[k] = -1  # consume so cancelled loops are not re-walked
                    break
                k = nxt[k]
            if nxt_node < 0 or j > nv:
                break
            node = nxt_node
    return flow, paths


# ---------------------------------------------------------------------------
# boundary walk for the lowest crossing


@njit(cache=True)
def lowest_walk(nbr, eid, state, xs, n):
    """Right-hand wall walk from the bottom-left corner with the left column wired.

    Returns the walk's vertex sequence, ending at the first visit to the
    right column (or -1 padded / truncated if the step budget runs out).
    """
    nv = nbr.shape[0]
    budget = 8 * nv + 16
    out = np.full(budget + 1, -1, np.int64)
    u = 0  # (-n, -n)
    d = 0  # heading east
    out[0] = u
    k = 1
    while k < budget:
        if xs[u] == n:
            return out[:k]
        moved = False
        for turn in (3, 0, 1, 2):
            dd = (d + turn) % 4
            v = nbr[u, dd]
            if v < 0:
                continue
            ok = state[eid[u, dd]] == 1
            if not ok and xs[u] == -n and xs[v] == -n:
                ok = True
            if ok:
                u = v
                d = dd
                moved = True
                break
        if not moved:
            return out[:0]
        out[k] = u
        k += 1
    return out[:0]


@njit(cache=True)
def loop_erase(walk, nv):
    """Chronological loop erasure of a vertex walk."""
    pos = np.full(nv, -1, np.int64)
    out = np.empty(walk.shape[0], np.int64)
    m = 0
    for v in walk:
        p = pos[v]
        if p >= 0:
            for j in range(p + 1, m):
                pos[out[j]] = -1
            m = p + 1
        else:
            pos[v] = m
            out[m] = v
            m += 1
    return out[:m]


@njit(cache=True)
def arc_walk(nbr, eid, state, allowed, start, heading, goal, hand):
    """Wall walk over open edges inside ``allowed`` from ``start``.

    ``hand`` = 1 keeps the wall on the left (prefer left turns), 3 on the
    right.  Stops on reaching ``goal``; returns an empty array on failure.
    """
    nv = nbr.shape[0]
    budget = 8 * nv + 16
    out = np.full(budget + 1, -1, np.int64)
    u = start
    d = heading
    out[0] = u
    k = 1
    # the first step is forced along the heading
    v = nbr[u, d]
    if v < 0 or not allowed[v] or state[eid[u, d]] != 1:
        return out[:0]
    u = v
    out[k] = u
    k += 1
    if hand == 1:
        order = (1, 0, 3, 2)
    else:
        order = (3, 0, 1, 2)
    while k < budget:
        if u == goal:
            return out[:k]
        moved = False
        for turn in order:
            dd = (d + turn) % 4
            v = nbr[u, dd]
            if v < 0 or not allowed[v] or state[eid[u, dd]] != 1:
                continue
            u = v
            d = dd
            moved = True
            break
        if not moved:
            return out[:0]
        out[k] = u
        k += 1
    return out[:0]


# ---------------------------------------------------------------------------
# edge-capacitated flow on an explicit undirected graph


@njit(cache=True)
def edge_flow(num_nodes, eu, ev, ecap, s, t, max_flow):
    """Edmonds-Karp value (capped at ``max_flow``) for undirected capacities."""
    m_arcs = 4 * eu.shape[0]
    heads = np.full(num_nodes, -1, np.int64)
    nxt = np.empty(m_arcs, np.int64)
    to = np.empty(m_arcs, np.int64)
    cap = np.empty(m_arcs, np.int64)
    m = 0
    for i in range(eu.shape[0]):
        m = _add_arc(heads, nxt, to, cap, m, eu[i], ev[i], ecap[i])
        m = _add_arc(heads, nxt, to, cap, m, ev[i], eu[i], ecap[i])
    flow = 0
    prev_arc = np.full(num_nodes, -1, np.int64)
    seen = np.zeros(num_nodes, np.bool_)
    queue = np.empty(num_nodes, np.int64)
    while flow < max_flow:
        seen[:] = False
        seen[s] = True
        queue[0] = s
        head = 0
        tail = 1
        found = False
        while head < tail and not found:
            a = queue[head]
            head += 1
            k = heads[a]
            while k >= 0:
                b = to[k]
                if cap[k] > 0 and not seen[b]:
                    seen[b] = True
                    prev_arc[b] = k
                    if b == t:
                        found = True
                        break
                    queue[tail] = b
                    tail += 1
                k = nxt[k]
        if not found:
            break
        b = t
        while b != s:
            k = prev_arc[b]
            cap[k] -= 1
            cap[k ^ 1] += 1
            b = to[k ^ 1]
        flow += 1
    return flow


@njit(cache=True)
def three_arm_flags(nbr, eid, state, allowed, tid, ends, dreach, dends, cand):
    """Open candidate edges with two disjoint open arms into the targets of
    ``tid`` (one each) and a dual face in the pre-computed closed reach set."""
    out = np.zeros(state.shape[0], np.bool_)
    caps = np.ones(2, np.int64)
    src = np.empty(2, np.int64)
    for e in cand:
        if state[e] != 1:
            continue
        if not (dreach[dends[e, 0]] or dreach[dends[e, 1]]):
            continue
        a = ends[e, 0]
        b = ends[e, 1]
        if not (allowed[a] and allowed[b]):
            continue
        src[0] = a
        src[1] = b
        f, _ = disjoint_paths(nbr, eid, state, 1, allowed, src, tid, caps, 2)
        out[e] = f == 2
    return out
