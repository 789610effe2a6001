//! Gap-acceptance lane changing with a keep-right bias. Lane 0 is the
//! rightmost lane; "left" means a higher lane index.

use super::config::DriverConfig;
use super::kinematics::{is_safe_state, max_safe_speed, LeaderView};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneChange {
    Stay,
    MoveLeft,
    MoveRight,
}

/// Nearest vehicle ahead or behind in one lane. `gap` is the bumper-to-bumper
/// distance minus the standstill gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbour {
    pub gap: f64,
    pub speed: f64,
    pub decel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaneSurroundings {
    pub leader: Option<Neighbour>,
    pub follower: Option<Neighbour>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Surroundings {
    pub current: LaneSurroundings,
    pub left: Option<LaneSurroundings>,
    pub right: Option<LaneSurroundings>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ego {
    pub speed: f64,
    pub decel: f64,
    /// The speed the vehicle is trying to hold (its reference).
    pub v_desired: f64,
}

/// A slower leader obstructs once it is within `range` or close enough that
/// car following would already hold the ego below its desired speed.
fn obstructed(ego: &Ego, lane: &LaneSurroundings, range: f64, threshold: f64) -> bool {
    lane.leader.is_some_and(|l| {
        let view = LeaderView {
            gap: l.gap,
            speed: l.speed,
            decel: l.decel,
        };
        l.speed < ego.v_desired - threshold && (l.gap <= range || max_safe_speed(ego.decel, &view) < ego.v_desired)
    })
}

fn safe_to_enter(ego: &Ego, lane: &LaneSurroundings) -> bool {
    let ahead_ok = lane.leader.is_none_or(|l| {
        is_safe_state(
            ego.speed,
            ego.decel,
            &LeaderView {
                gap: l.gap,
                speed: l.speed,
                decel: l.decel,
            },
        )
    });
    let behind_ok = lane.follower.is_none_or(|f| {
        is_safe_state(
            f.speed,
            f.decel,
            &LeaderView {
                gap: f.gap,
                speed: ego.speed,
                decel: ego.decel,
            },
        )
    });
    ahead_ok && behind_ok
}

pub fn lane_change_decide(ego: &Ego, s: &Surroundings, params: &DriverConfig) -> LaneChange {
    let look = params.overtake_lookahead_m;
    let thr = params.overtake_threshold_ms;
    if obstructed(ego, &s.current, look, thr) {
        if let Some(left) = &s.left {
            let better = match (left.leader, s.current.leader) {
                (None, _) => true,
                (Some(l), Some(c)) => !obstructed(ego, left, look, thr) || l.speed > c.speed + thr,
                (Some(_), None) => false,
            };
            if better && safe_to_enter(ego, left) {
                return LaneChange::MoveLeft;
            }
        }
        return LaneChange::Stay;
    }
    if let Some(right) = &s.right {
        if !obstructed(ego, right, 2.0 * look, thr) && safe_to_enter(ego, right) {
            return LaneChange::MoveRight;
        }
    }
    LaneChange::Stay
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ego() -> Ego {
        Ego {
            speed: 30.0,
            decel: 4.5,
            v_desired: 36.0,
        }
    }

    fn slow_leader(gap: f64) -> Neighbour {
        Neighbour {
            gap,
            speed: 16.7,
            decel: 3.5,
        }
    }

    #[test]
    fn no_leader_on_single_lane_stays() {
        let s = Surroundings::default();
        assert_eq!(lane_change_decide(&ego(), &s, &DriverConfig::default()), LaneChange::Stay);
    }

    #[test]
    fn returns_right_when_clear() {
        let s = Surroundings {
            right: Some(LaneSurroundings::default()),
            ..Default::default()
        };
        assert_eq!(lane_change_decide(&ego(), &s, &DriverConfig::default()), LaneChange::MoveRight);
    }

    #[test]
    fn overtakes_into_empty_lane() {
        let s = Surroundings {
            current: LaneSurroundings {
                leader: Some(slow_leader(60.0)),
                follower: None,
            },
            left: Some(LaneSurroundings::default()),
            right: None,
        };
        assert_eq!(lane_change_decide(&ego(), &s, &DriverConfig::default()), LaneChange::MoveLeft);
    }

    #[test]
    fn refuses_unsafe_gap_behind() {
        let s = Surroundings {
            current: LaneSurroundings {
                leader: Some(slow_leader(60.0)),
                follower: None,
            },
            left: Some(LaneSurroundings {
                leader: None,
                follower: Some(Neighbour {
                    gap: 3.0,
                    speed: 36.0,
                    decel: 4.5,
                }),
            }),
            right: None,
        };
        assert_eq!(lane_change_decide(&ego(), &s, &DriverConfig::default()), LaneChange::Stay);
    }

    #[test]
    fn does_not_return_right_behind_slow_vehicle() {
        let s = Surroundings {
            right: Some(LaneSurroundings {
                leader: Some(slow_leader(150.0)),
                follower: None,
            }),
            ..Default::default()
        };
        assert_eq!(lane_change_decide(&ego(), &s, &DriverConfig::default()), LaneChange::Stay);
    }

    #[test]
    fn overtakes_before_car_following_binds() {
        // a heavy vehicle at 29.5 m/s must start braking well outside 100 m
        let heavy = Ego {
            speed: 29.5,
            decel: 3.5,
            v_desired: 29.5,
        };
        let s = Surroundings {
            current: LaneSurroundings {
                leader: Some(slow_leader(102.0)),
                follower: None,
            },
            left: Some(LaneSurroundings::default()),
            right: None,
        };
        assert_eq!(lane_change_decide(&heavy, &s, &DriverConfig::default()), LaneChange::MoveLeft);
        let mut far = s;
        far.current.leader = Some(slow_leader(400.0));
        assert_eq!(lane_change_decide(&heavy, &far, &DriverConfig::default()), LaneChange::Stay);
    }
}
