//! Tour construction over planar points.
//!
//! Small instances are solved exactly with Held-Karp dynamic programming;
//! larger ones use nearest-neighbour construction followed by 2-opt.

pub type Point = [f64; 2];

const IMPROVEMENT_EPS: f64 = 1e-12;

#[inline]
pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Length of the tour visiting `points[order[0]], points[order[1]], ...`,
/// returning to the start when `closed`.
pub fn tour_length(points: &[Point], order: &[usize], closed: bool) -> f64 {
    let mut total = 0.0;
    for w in order.windows(2) {
        total += distance(points[w[0]], points[w[1]]);
    }
    if closed && order.len() > 1 {
        total += distance(points[order[order.len() - 1]], points[order[0]]);
    }
    total
}

/// Distance-minimal (or 2-opt locally minimal above `exact_threshold`) visiting
/// order over all of `points`, as indices into `points`.
///
/// Closed tours always start at index 0.
pub fn optimal_order(points: &[Point], closed: bool, exact_threshold: usize) -> Vec<usize> {
    let n = points.len();
    if n <= 2 {
        return (0..n).collect();
    }
    if n <= exact_threshold {
        let dist = distance_matrix(points);
        return if closed {
            held_karp_closed(&dist)
        } else {
            held_karp_open(&dist)
        };
    }
    let identity: Vec<usize> = (0..n).collect();
    let mut from_identity = identity.clone();
    two_opt(points, &mut from_identity, closed);
    let mut from_nn = nearest_neighbor(points);
    two_opt(points, &mut from_nn, closed);
    let best = if tour_length(points, &from_nn, closed) < tour_length(points, &from_identity, closed)
    {
        from_nn
    } else {
        from_identity
    };
    if closed {
        rotate_to_zero(best)
    } else {
        best
    }
}

fn distance_matrix(points: &[Point]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|&a| points.iter().map(|&b| distance(a, b)).collect())
        .collect()
}

fn held_karp_closed(dist: &[Vec<f64>]) -> Vec<usize> {
    let n = dist.len();
    let full = 1usize << n;
    let mut cost = vec![f64::INFINITY; full * n];
    let mut parent = vec![usize::MAX; full * n];
    cost[n] = 0.0; // mask {0}, ending at 0
    for mask in 1..full {
        if mask & 1 == 0 {
            continue;
        }
        for last in 0..n {
            let here = cost[mask * n + last];
            if mask & (1 << last) == 0 || !here.is_finite() {
                continue;
            }
            for next in 1..n {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let grown = mask | (1 << next);
                let cand = here + dist[last][next];
                if cand < cost[grown * n + next] {
                    cost[grown * n + next] = cand;
                    parent[grown * n + next] = last;
                }
            }
        }
    }
    let all = full - 1;
    let mut best_last = 1;
    let mut best = f64::INFINITY;
    for last in 1..n {
        let cand = cost[all * n + last] + dist[last][0];
        if cand < best {
            best = cand;
            best_last = last;
        }
    }
    unwind(&parent, n, all, best_last)
}

fn held_karp_open(dist: &[Vec<f64>]) -> Vec<usize> {
    let n = dist.len();
    let full = 1usize << n;
    let mut cost = vec![f64::INFINITY; full * n];
    let mut parent = vec![usize::MAX; full * n];
    for start in 0..n {
        cost[(1 << start) * n + start] = 0.0;
    }
    for mask in 1..full {
        for last in 0..n {
            let here = cost[mask * n + last];
            if mask & (1 << last) == 0 || !here.is_finite() {
                continue;
            }
            for next in 0..n {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let grown = mask | (1 << next);
                let cand = here + dist[last][next];
                if cand < cost[grown * n + next] {
                    cost[grown * n + next] = cand;
                    parent[grown * n + next] = last;
                }
            }
        }
    }
    let all = full - 1;
    let mut best_last = 0;
    let mut best = f64::INFINITY;
    for last in 0..n {
        if cost[all * n + last] < best {
            best = cost[all * n + last];
            best_last = last;
        }
    }
    unwind(&parent, n, all, best_last)
}

fn unwind(parent: &[usize], n: usize, mut mask: usize, mut last: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(n);
    loop {
        order.push(last);
        let prev = parent[mask * n + last];
        mask &= !(1 << last);
        if prev == usize::MAX {
            break;
        }
        last = prev;
    }
    order.reverse();
    order
}

fn nearest_neighbor(points: &[Point]) -> Vec<usize> {
    let n = points.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut current = 0;
    visited[0] = true;
    order.push(0);
    for _ in 1..n {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (j, &seen) in visited.iter().enumerate() {
            if !seen {
                let d = distance(points[current], points[j]);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
        }
        visited[best] = true;
        order.push(best);
        current = best;
    }
    order
}

/// Segment-reversal local search until no improving move remains.
pub fn two_opt(points: &[Point], order: &mut [usize], closed: bool) {
    let n = order.len();
    if (closed && n < 4) || n < 3 {
        return;
    }
    let d = |a: usize, b: usize| distance(points[a], points[b]);
    loop {
        let mut improved = false;
        if closed {
            for i in 0..n - 2 {
                for j in i + 2..n {
                    if i == 0 && j == n - 1 {
                        continue;
                    }
                    let (a, b) = (order[i], order[i + 1]);
                    let (c, e) = (order[j], order[(j + 1) % n]);
                    let delta = d(a, c) + d(b, e) - d(a, b) - d(c, e);
                    if delta < -IMPROVEMENT_EPS {
                        order[i + 1..=j].reverse();
                        improved = true;
                    }
                }
            }
        } else {
            // reverse order[lo..=hi]; edges outside the path contribute nothing
            for lo in 0..n {
                for hi in lo + 1..n {
                    if lo == 0 && hi == n - 1 {
                        continue;
                    }
                    let mut delta = 0.0;
                    if lo > 0 {
                        delta += d(order[lo - 1], order[hi]) - d(order[lo - 1], order[lo]);
                    }
                    if hi + 1 < n {
                        delta += d(order[lo], order[hi + 1]) - d(order[hi], order[hi + 1]);
                    }
                    if delta < -IMPROVEMENT_EPS {
                        order[lo..=hi].reverse();
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
}

fn rotate_to_zero(mut order: Vec<usize>) -> Vec<usize> {
    if let Some(pos) = order.iter().position(|&i| i == 0) {
        order.rotate_left(pos);
    }
    order
}
