"""Compiled inner loops shared by the public world/network API and full trials.

Everything here works on flat numpy arrays so the same compiled code serves a
single ``step`` call from Python and a 5000-tick trial inside one kernel call.
No fastmath: results must be bit-identical between the two call paths.
"""

import math

import numpy as np
from numba import njit

# layout of the float64 parameter vector built by ArenaConfig.as_params()
P_WIDTH = 0
P_HEIGHT = 1
P_NEST_X = 2
P_NEST_Y = 3
P_NEST_R = 4
P_COLLECT_R = 5
P_SENSOR_RANGE = 6
P_WHEEL_BASE = 7
P_SPEED_SCALE = 8
P_DT = 9
P_HALF_LIFE = 10
P_MIN_SPACING = 11
P_DIAG = 12
N_PARAMS = 13

# layout of the int64 counter vector
C_TICK = 0
C_PICKED = 1
C_DELIVERED = 2
C_NPHER = 3

N_SENSORS = 24
SENSOR_STEP = math.pi / 12.0
# sensor 0 sits 37.5 deg right of the heading, so sensors 0-5 straddle the front
SENSOR_START = -2.5 * SENSOR_STEP
TWO_PI = 2.0 * math.pi
MAX_WHEEL = 16.0


@njit(cache=True)
def wrap_angle(a):
    """Map an angle into (-pi, pi]; in-range angles come back bit-identical."""
    if -math.pi < a <= math.pi:
        return a
    a += math.pi
    a -= TWO_PI * math.floor(a / TWO_PI)
    a -= math.pi
    if a <= -math.pi:
        a = math.pi
    return a


@njit(cache=True)
def grid_dims(params):
    cs = params[P_COLLECT_R]
    gx = int(math.ceil(params[P_WIDTH] / cs))
    gy = int(math.ceil(params[P_HEIGHT] / cs))
    return cs, max(gx, 1), max(gy, 1)


@njit(cache=True)
def cell_of(x, y, cs, gx, gy):
    cx = int(x / cs)
    cy = int(y / cs)
    if cx < 0:
        cx = 0
    elif cx >= gx:
        cx = gx - 1
    if cy < 0:
        cy = 0
    elif cy >= gy:
        cy = gy - 1
    return cx, cy


@njit(cache=True)
def build_resource_grid(res_xy, params):
    """CSR bucket index of resources by collection-radius cell."""
    cs, gx, gy = grid_dims(params)
    n = res_xy.shape[0]
    counts = np.zeros(gx * gy + 1, dtype=np.int64)
    cells = np.empty(n, dtype=np.int64)
    for k in range(n):
        cx, cy = cell_of(res_xy[k, 0], res_xy[k, 1], cs, gx, gy)
        cells[k] = cx * gy + cy
        counts[cells[k] + 1] += 1
    start = np.cumsum(counts)
    fill = start[:-1].copy()
    items = np.empty(n, dtype=np.int64)
    for k in range(n):
        c = cells[k]
        items[fill[c]] = k
        fill[c] += 1
    return start, items


@njit(cache=True)
def build_pheromone_grid(pher_xy, n_marks, params, capacity):
    cs, gx, gy = grid_dims(params)
    head = np.full(gx * gy, -1, dtype=np.int64)
    nxt = np.full(capacity, -1, dtype=np.int64)
    for m in range(n_marks):
        cx, cy = cell_of(pher_xy[m, 0], pher_xy[m, 1], cs, gx, gy)
        c = cx * gy + cy
        nxt[m] = head[c]
        head[c] = m
    return head, nxt


@njit(cache=True)
def nearest_resource(x, y, res_xy, collected, rstart, ritems, params):
    """Index of the nearest uncollected resource within collection radius, or -1.

    Ties on distance go to the lower index.
    """
    cs, gx, gy = grid_dims(params)
    r = params[P_COLLECT_R]
    cx, cy = cell_of(x, y, cs, gx, gy)
    best = -1
    best_d = math.inf
    for ix in range(cx - 1, cx + 2):
        if ix < 0 or ix >= gx:
            continue
        for iy in range(cy - 1, cy + 2):
            if iy < 0 or iy >= gy:
                continue
            c = ix * gy + iy
            for j in range(rstart[c], rstart[c + 1]):
                k = ritems[j]
                if collected[k]:
                    continue
                d = math.hypot(res_xy[k, 0] - x, res_xy[k, 1] - y)
                if d <= r and (d < best_d or (d == best_d and k < best)):
                    best = k
                    best_d = d
    return best


@njit(cache=True)
def pheromone_near(x, y, tick, pher_xy, pher_birth, head, nxt, params):
    cs, gx, gy = grid_dims(params)
    r = params[P_COLLECT_R]
    half_life = params[P_HALF_LIFE]
    dt = params[P_DT]
    cx, cy = cell_of(x, y, cs, gx, gy)
    for ix in range(cx - 1, cx + 2):
        if ix < 0 or ix >= gx:
            continue
        for iy in range(cy - 1, cy + 2):
            if iy < 0 or iy >= gy:
                continue
            m = head[ix * gy + iy]
            while m >= 0:
                # strength 0.5 ** (age / half_life) >= 0.5  <=>  age <= half_life
                if (tick - pher_birth[m]) * dt <= half_life:
                    if math.hypot(pher_xy[m, 0] - x, pher_xy[m, 1] - y) <= r:
                        return True
                m = nxt[m]
    return False


@njit(cache=True)
def sense_robot(i, pose, holding, res_xy, collected, rstart, ritems,
                pher_xy, pher_birth, head, nxt, tick, params, out):
    """Fill ``out[0:15]`` with robot ``i``'s sensor channels."""
    x = pose[i, 0]
    y = pose[i, 1]
    th = pose[i, 2]

    out[0] = 0.0
    out[1] = 0.0
    out[2] = math.sin(0.5 * th)
    out[3] = math.cos(0.5 * th)

    out[4] = 1.0 if holding[i] else 0.0
    near = False
    if holding[i]:
        near = nearest_resource(x, y, res_xy, collected, rstart, ritems, params) >= 0
    out[5] = 1.0 if near else 0.0

    dx = params[P_NEST_X] - x
    dy = params[P_NEST_Y] - y
    d = math.hypot(dx, dy)
    mag = 1.0 - d / params[P_DIAG]
    if mag < 0.0:
        mag = 0.0
    elif mag > 1.0:
        mag = 1.0
    for k in range(4):
        out[6 + k] = 0.0
    if d == 0.0:
        for k in range(4):
            out[6 + k] = mag
    else:
        bearing = math.atan2(dy, dx) - th
        for s in range(N_SENSORS):
            c = math.cos(SENSOR_START + s * SENSOR_STEP - bearing)
            if c < 0.0:
                c = 0.0
            v = mag * c
            k = 6 + s // 6
            if v > out[k]:
                out[k] = v

    out[10] = 1.0 if pheromone_near(x, y, tick, pher_xy, pher_birth, head, nxt, params) else 0.0

    for k in range(4):
        out[11 + k] = 0.0
    rng = params[P_SENSOR_RANGE]
    for j in range(pose.shape[0]):
        if j == i:
            continue
        ox = pose[j, 0] - x
        oy = pose[j, 1] - y
        dj = math.hypot(ox, oy)
        if dj >= rng:
            continue
        rel = math.atan2(oy, ox) - th - (SENSOR_START - 0.5 * SENSOR_STEP)
        rel -= TWO_PI * math.floor(rel / TWO_PI)
        s = int(rel / SENSOR_STEP)
        if s >= N_SENSORS:
            s = N_SENSORS - 1
        v = 1.0 - dj / rng
        k = 11 + s // 6
        if v > out[k]:
            out[k] = v


@njit(cache=True)
def move_robot(pose, i, vl, vr, params):
    """Exact arc integration of differential-drive motion, clamped to the arena."""
    scale = params[P_SPEED_SCALE]
    dt = params[P_DT]
    v = scale * (vl + vr) * 0.5
    w = scale * (vr - vl) / params[P_WHEEL_BASE]
    x = pose[i, 0]
    y = pose[i, 1]
    th = pose[i, 2]
    if abs(w) < 1e-12:
        x += v * math.cos(th) * dt
        y += v * math.sin(th) * dt
    else:
        th2 = th + w * dt
        x += v / w * (math.sin(th2) - math.sin(th))
        y -= v / w * (math.cos(th2) - math.cos(th))
        th = th2
    pose[i, 0] = min(max(x, 0.0), params[P_WIDTH])
    pose[i, 1] = min(max(y, 0.0), params[P_HEIGHT])
    pose[i, 2] = wrap_angle(th)


@njit(cache=True)
def advance(cmd, pose, holding, last_mark, has_mark, res_xy, collected, rstart, ritems,
            pher_xy, pher_birth, head, nxt, counts, params, laid):
    """One world tick for all robots; ``laid[i]`` reports a new mark by robot i."""
    n = pose.shape[0]
    for i in range(n):
        move_robot(pose, i, cmd[i, 0], cmd[i, 1], params)
    counts[C_TICK] += 1
    tick = counts[C_TICK]
    cs, gx, gy = grid_dims(params)
    for i in range(n):
        laid[i] = False
        x = pose[i, 0]
        y = pose[i, 1]
        if not holding[i]:
            k = nearest_resource(x, y, res_xy, collected, rstart, ritems, params)
            if k >= 0:
                collected[k] = True
                holding[i] = True
                counts[C_PICKED] += 1
        elif math.hypot(x - params[P_NEST_X], y - params[P_NEST_Y]) <= params[P_NEST_R]:
            holding[i] = False
            counts[C_DELIVERED] += 1
        if cmd[i, 2] > 0.0:
            ok = True
            if has_mark[i]:
                ok = math.hypot(x - last_mark[i, 0], y - last_mark[i, 1]) >= params[P_MIN_SPACING]
            m = counts[C_NPHER]
            if ok and m < pher_xy.shape[0]:
                pher_xy[m, 0] = x
                pher_xy[m, 1] = y
                pher_birth[m] = tick
                cx, cy = cell_of(x, y, cs, gx, gy)
                c = cx * gy + cy
                nxt[m] = head[c]
                head[c] = m
                counts[C_NPHER] = m + 1
                last_mark[i, 0] = x
                last_mark[i, 1] = y
                has_mark[i] = True
                laid[i] = True


@njit(cache=True)
def propagate(act, inputs, input_idx, bias_idx, free_idx, src, dst, w, passes, slope, acc):
    """``passes`` synchronous update rounds over a possibly cyclic network.

    ``act`` holds the previous activation of every node and is updated in
    place. Input nodes are clamped to ``inputs`` and the bias to 1 before each
    round; every other node takes sigma(sum of weighted previous activations).
    """
    for _ in range(passes):
        for k in range(input_idx.shape[0]):
            act[input_idx[k]] = inputs[k]
        if bias_idx >= 0:
            act[bias_idx] = 1.0
        for j in range(acc.shape[0]):
            acc[j] = 0.0
        for c in range(src.shape[0]):
            acc[dst[c]] += w[c] * act[src[c]]
        for k in range(free_idx.shape[0]):
            j = free_idx[k]
            act[j] = 1.0 / (1.0 + math.exp(-slope * acc[j]))


@njit(cache=True)
def decode(o_left, o_right, o_lay, lay_threshold, cmd, i):
    cmd[i, 0] = (o_left - 0.5) * 2.0 * MAX_WHEEL
    cmd[i, 1] = (o_right - 0.5) * 2.0 * MAX_WHEEL
    cmd[i, 2] = 1.0 if o_lay > lay_threshold else 0.0


@njit(cache=True)
def run_trial(pose, holding, last_mark, has_mark, res_xy, collected, rstart, ritems,
              pher_xy, pher_birth, head, nxt, counts, params, ticks,
              n_nodes, input_idx, bias_idx, output_idx, free_idx, src, dst, w,
              passes, slope, lay_threshold, mask_on, mask_value):
    """Run ``ticks`` closed-loop control ticks; world arrays are mutated in place.

    Returns the cumulative delivery count after each tick (index 0 is the
    initial state).
    """
    n = pose.shape[0]
    act = np.empty((n, n_nodes))
    for i in range(n):
        for j in range(n_nodes):
            act[i, j] = 0.0
        for k in range(free_idx.shape[0]):
            act[i, free_idx[k]] = 0.5
    acc = np.empty(n_nodes)
    frame = np.empty(15)
    cmd = np.zeros((n, 3))
    laid = np.zeros(n, dtype=np.bool_)
    delivered = np.empty(ticks + 1, dtype=np.int64)
    delivered[0] = counts[C_DELIVERED]
    for t in range(ticks):
        for i in range(n):
            sense_robot(i, pose, holding, res_xy, collected, rstart, ritems,
                        pher_xy, pher_birth, head, nxt, counts[C_TICK], params, frame)
            for c in range(15):
                if not mask_on[c]:
                    frame[c] = mask_value[c]
            propagate(act[i], frame, input_idx, bias_idx, free_idx, src, dst, w,
                      passes, slope, acc)
            decode(act[i, output_idx[0]], act[i, output_idx[1]], act[i, output_idx[2]],
                   lay_threshold, cmd, i)
        advance(cmd, pose, holding, last_mark, has_mark, res_xy, collected, rstart, ritems,
                pher_xy, pher_birth, head, nxt, counts, params, laid)
        delivered[t + 1] = counts[C_DELIVERED]
    return delivered
