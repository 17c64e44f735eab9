//! Maximum-angle insertion: the designer's mental model of where a newly
//! added stop goes in an existing tour.

use crate::trip::routing::Point;

/// Angle at `p` between the rays towards `a` and `b`, in radians.
pub fn angle_at(p: Point, a: Point, b: Point) -> f64 {
    let u = [a[0] - p[0], a[1] - p[1]];
    let v = [b[0] - p[0], b[1] - p[1]];
    let cross = u[0] * v[1] - u[1] * v[0];
    let dot = u[0] * v[0] + u[1] * v[1];
    cross.abs().atan2(dot)
}

/// Score of every insertion position for `new` in the tour `tour` (point
/// coordinates in visiting order). Entry `k` is the score of inserting at
/// position `k`, i.e. the result is `tour[..k] ++ [new] ++ tour[k..]`.
///
/// Interior positions score the angle at `new` between its two prospective
/// neighbours. For closed tours position `len` is the wrap-around slot between
/// the last and first stop and position 0 is not offered (`NEG_INFINITY`),
/// since it describes the same cycle. For open tours positions 0 and `len`
/// extend the path; they score the angle at the endpoint being extended, so a
/// perfectly straight continuation scores pi like a collinear interior point.
pub fn slot_angles(tour: &[Point], new: Point, closed: bool) -> Vec<f64> {
    let m = tour.len();
    let mut scores = vec![f64::NEG_INFINITY; m + 1];
    if m < 2 {
        return scores;
    }
    for (k, score) in scores.iter_mut().enumerate().take(m).skip(1) {
        *score = angle_at(new, tour[k - 1], tour[k]);
    }
    if closed {
        scores[m] = angle_at(new, tour[m - 1], tour[0]);
    } else {
        scores[0] = angle_at(tour[0], new, tour[1]);
        scores[m] = angle_at(tour[m - 1], new, tour[m - 2]);
    }
    scores
}

/// Insertion position chosen by the max-angle rule; ties go to the lowest
/// position. Tours of length 0 or 1 append.
pub fn max_angle_position(tour: &[Point], new: Point, closed: bool) -> usize {
    if tour.len() < 2 {
        return tour.len();
    }
    let scores = slot_angles(tour, new, closed);
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn collinear_point_gets_straight_angle() {
        assert!((angle_at([1.0, 0.0], [0.0, 0.0], [2.0, 0.0]) - PI).abs() < 1e-12);
        assert_eq!(max_angle_position(&[[0.0, 0.0], [2.0, 0.0]], [1.0, 0.0], true), 1);
        assert_eq!(max_angle_position(&[[0.0, 0.0], [2.0, 0.0]], [1.0, 0.0], false), 1);
    }

    #[test]
    fn short_tours_append() {
        assert_eq!(max_angle_position(&[], [1.0, 1.0], true), 0);
        assert_eq!(max_angle_position(&[[0.0, 0.0]], [1.0, 1.0], false), 1);
    }

    #[test]
    fn open_tour_extends_a_straight_line() {
        let tour = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert_eq!(max_angle_position(&tour, [3.0, 0.0], false), 3);
        assert_eq!(max_angle_position(&tour, [-1.0, 0.0], false), 0);
    }

    #[test]
    fn closed_square_picks_edge_nearest_new_point() {
        let tour = [[0.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 4.0]];
        // just outside the middle of the top edge (between index 2 and 3)
        assert_eq!(max_angle_position(&tour, [2.0, 4.2], true), 3);
        // just left of the left edge, the wrap-around slot
        assert_eq!(max_angle_position(&tour, [-0.2, 2.0], true), 4);
    }
}
