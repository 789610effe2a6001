//! Krauss-style safe-speed car following on a 1 s grid.
//!
//! Positions advance by the new speed each step. A follower is in a *safe
//! state* when, braking at its own maximum deceleration from now on, it stops
//! behind where its leader would stop if the leader braked as hard as
//! `max(b_leader, b_follower)`. Choosing each new speed so that the next state
//! is safe again keeps every gap non-negative, whatever the leader does within
//! its own deceleration limit.

/// Distance covered while braking at `decel` from `v`, one step at a time:
/// `Σ_{n≥1} max(0, v - n·decel)`.
pub fn stopping_distance(v: f64, decel: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let k = (v / decel).floor();
    k * v - decel * k * (k + 1.0) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeaderView {
    /// Bumper-to-bumper distance minus the standstill gap, m.
    pub gap: f64,
    pub speed: f64,
    pub decel: f64,
}

fn leader_budget(leader: &LeaderView, follower_decel: f64) -> f64 {
    leader.gap + stopping_distance(leader.speed, leader.decel.max(follower_decel))
}

pub fn is_safe_state(speed: f64, decel: f64, leader: &LeaderView) -> bool {
    leader.gap >= 0.0 && stopping_distance(speed, decel) <= leader_budget(leader, decel)
}

/// Largest speed for the coming step that leaves the follower in a safe state.
pub fn max_safe_speed(decel: f64, leader: &LeaderView) -> f64 {
    let budget = leader_budget(leader, decel);
    if leader.gap < 0.0 || budget <= 0.0 {
        return 0.0;
    }
    // v + stopping_distance(v) is piecewise linear with slope k + 1 on [k·b, (k+1)·b)
    let mut k = 0.0_f64;
    loop {
        let v = budget / (k + 1.0) + decel * k / 2.0;
        if v < (k + 1.0) * decel || k > 1e6 {
            return v.max(0.0);
        }
        k += 1.0;
    }
}

/// Highest speed at which a vehicle can be placed behind `leader` and still be
/// in a safe state.
pub fn max_insertion_speed(decel: f64, leader: &LeaderView) -> Option<f64> {
    if leader.gap < 0.0 {
        return None;
    }
    Some(max_safe_speed(decel, leader) + decel)
}

/// One step of longitudinal control. The result never drops by more than
/// `decel` below `speed` and never exceeds `v_desired`, `speed + accel` or
/// the safe speed behind `leader` unless braking harder would be needed.
pub fn car_following_update(
    speed: f64,
    accel: f64,
    decel: f64,
    v_desired: f64,
    leader: Option<&LeaderView>,
) -> f64 {
    let mut target = (speed + accel).min(v_desired.max(0.0));
    if let Some(l) = leader {
        target = target.min(max_safe_speed(decel, l));
    }
    target.max((speed - decel).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_stopping(v: f64, b: f64) -> f64 {
        (1..10_000).map(|n| (v - n as f64 * b).max(0.0)).sum()
    }

    #[test]
    fn stopping_distance_matches_sum() {
        for &(v, b) in &[(0.0, 4.5), (4.5, 4.5), (13.9, 4.5), (36.1, 6.0), (20.0, 1.0), (3.0, 3.5)] {
            assert!((stopping_distance(v, b) - brute_stopping(v, b)).abs() < 1e-9);
        }
    }

    #[test]
    fn free_road_accelerates_by_accel() {
        let v = car_following_update(0.0, 2.6, 4.5, 36.1, None);
        assert!((v - 2.6).abs() < 1e-12);
    }

    #[test]
    fn reference_below_speed_brakes_at_most_decel() {
        let v = car_following_update(30.0, 2.6, 4.5, 10.0, None);
        assert!((v - 25.5).abs() < 1e-12);
        let v = car_following_update(12.0, 2.6, 4.5, 10.0, None);
        assert!((v - 10.0).abs() < 1e-12);
    }

    #[test]
    fn stops_behind_stationary_leader() {
        // 20 m/s with 4.5 m/s² needs stopping_distance(20, 4.5) + 20 m of road
        let b = 4.5;
        let mut speed = 20.0;
        let mut front = 0.0;
        let leader_rear = 120.0;
        let min_gap = 2.5;
        for _ in 0..100 {
            let view = LeaderView {
                gap: leader_rear - front - min_gap,
                speed: 0.0,
                decel: 7.5,
            };
            speed = car_following_update(speed, 2.6, b, 36.0, Some(&view));
            front += speed;
            assert!(leader_rear - front >= 0.0);
        }
        assert_eq!(speed, 0.0);
        assert!(leader_rear - front > 0.0);
    }

    #[test]
    fn safe_speed_solves_the_budget_equation() {
        for &(gap, vl, bl, bf) in &[(30.0, 10.0, 4.5, 4.5), (5.0, 0.0, 6.0, 1.0), (100.0, 20.0, 1.0, 6.0)] {
            let l = LeaderView { gap, speed: vl, decel: bl };
            let v = max_safe_speed(bf, &l);
            let lhs = v + stopping_distance(v, bf);
            assert!((lhs - leader_budget(&l, bf)).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn following_never_collides(
            gap in 0.0f64..200.0,
            vf in 0.0f64..40.0,
            vl in 0.0f64..40.0,
            bf in 1.0f64..8.0,
            bl in 1.0f64..8.0,
            af in 0.5f64..5.0,
            leader_moves in proptest::collection::vec(-1.0f64..1.0, 60),
        ) {
            // start from a safe state and let the leader brake or accelerate at random
            let view = LeaderView { gap, speed: vl, decel: bl };
            prop_assume!(is_safe_state(vf, bf, &view));
            let (mut xf, mut xl, mut vf, mut vl) = (0.0, gap, vf, vl);
            for m in leader_moves {
                let view = LeaderView { gap: xl - xf, speed: vl, decel: bl };
                let nf = car_following_update(vf, af, bf, 40.0, Some(&view));
                let nl = if m < 0.0 { (vl + m * bl).max(0.0) } else { (vl + m).min(40.0) };
                vf = nf;
                vl = nl;
                xf += vf;
                xl += vl;
                prop_assert!(xl - xf >= -1e-9, "gap {}", xl - xf);
                let after = LeaderView { gap: xl - xf + 1e-9, speed: vl, decel: bl };
                prop_assert!(is_safe_state(vf, bf, &after));
            }
        }

        #[test]
        fn safe_speed_is_never_below_braking_when_safe(
            gap in 0.0f64..200.0,
            vf in 0.0f64..40.0,
            vl in 0.0f64..40.0,
            bf in 1.0f64..8.0,
            bl in 1.0f64..8.0,
        ) {
            let view = LeaderView { gap, speed: vl, decel: bl };
            prop_assume!(is_safe_state(vf, bf, &view));
            prop_assert!(max_safe_speed(bf, &view) >= (vf - bf).max(0.0) - 1e-9);
        }
    }
}
