//! Closed-form speed reference under road limits and Δv caps.
//!
//! For a follower `i` and each slower vehicle `j` ahead of it, the two caps
//! on predicted Δv translate into a cap on the closing speed `r̄`, so the
//! follower may drive at most `v_j + r̄`. The reference is the largest speed
//! satisfying all of these, but never below the road minimum.

use std::fmt;

use crate::domain::{RoadEdge, VehicleId, VehicleState};
use crate::risk_model::{inelastic_collision, AdvisoryBounds};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leader {
    pub id: VehicleId,
    pub mass: f64,
    pub speed: f64,
    /// Bumper-to-bumper distance, m.
    pub gap: f64,
}

/// Slower vehicles ahead of one follower on the same edge, within the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderSet {
    pub follower: VehicleId,
    pub leaders: Vec<Leader>,
}

impl LeaderSet {
    pub fn empty(follower: VehicleId) -> Self {
        Self {
            follower,
            leaders: Vec::new(),
        }
    }

    /// Collects every vehicle on the follower's edge (any lane) that is
    /// strictly ahead, at most `horizon` metres away and strictly slower.
    pub fn build<'a, I>(follower: &VehicleState, others: I, horizon: f64) -> Self
    where
        I: IntoIterator<Item = &'a VehicleState>,
    {
        let leaders = others
            .into_iter()
            .filter(|o| o.spec.id != follower.spec.id && o.edge == follower.edge)
            .filter_map(|o| {
                let gap = o.rear() - follower.position;
                (gap > 0.0 && gap <= horizon && o.speed < follower.speed).then_some(Leader {
                    id: o.spec.id,
                    mass: o.spec.mass,
                    speed: o.speed,
                    gap,
                })
            })
            .collect();
        Self {
            follower: follower.spec.id,
            leaders,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.leaders.is_empty()
    }
}

/// Which constraint produced the reference speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    RoadMax,
    SelfMax,
    /// Risk to the follower itself behind leader `j`.
    DvSelf(VehicleId),
    /// Risk the follower poses to leader `j`.
    DvOther(VehicleId),
    /// The road minimum overrides the Δv caps, which are then not met.
    RoadMin,
}

impl Binding {
    pub fn label(&self) -> &'static str {
        match self {
            Binding::RoadMax => "road_max",
            Binding::SelfMax => "self_max",
            Binding::DvSelf(_) => "dv_self",
            Binding::DvOther(_) => "dv_other",
            Binding::RoadMin => "road_min",
        }
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binding::DvSelf(j) | Binding::DvOther(j) => write!(f, "{}({j})", self.label()),
            _ => f.write_str(self.label()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedReference {
    pub vehicle: VehicleId,
    pub v_star: f64,
    pub binding: Binding,
}

fn cap_components(m_i: f64, m_j: f64, bounds: &AdvisoryBounds) -> (f64, f64) {
    let total = m_i + m_j;
    (total / m_j * bounds.dv_cap_self, total / m_i * bounds.dv_cap_other)
}

/// Largest closing speed for which neither Δv cap is exceeded.
pub fn closing_speed_cap(m_i: f64, m_j: f64, bounds: &AdvisoryBounds) -> f64 {
    let (self_cap, other_cap) = cap_components(m_i, m_j, bounds);
    self_cap.min(other_cap)
}

pub fn speed_reference(
    follower: &VehicleState,
    leaders: &LeaderSet,
    edge: &RoadEdge,
    bounds: &AdvisoryBounds,
) -> SpeedReference {
    let spec = &follower.spec;
    let (mut v, mut binding) = if edge.v_limit <= spec.v_max_self {
        (edge.v_limit, Binding::RoadMax)
    } else {
        (spec.v_max_self, Binding::SelfMax)
    };
    for j in &leaders.leaders {
        let (self_cap, other_cap) = cap_components(spec.mass, j.mass, bounds);
        let cap = j.speed + self_cap.min(other_cap);
        if cap < v {
            v = cap;
            binding = if self_cap <= other_cap {
                Binding::DvSelf(j.id)
            } else {
                Binding::DvOther(j.id)
            };
        }
    }
    if edge.v_min > v {
        v = edge.v_min;
        binding = Binding::RoadMin;
    }
    SpeedReference {
        vehicle: spec.id,
        v_star: v,
        binding,
    }
}

/// Worst predicted `(Δv_self, Δv_other)` over the leader set at the
/// follower's current speed; `(0, 0)` when the set is empty.
pub fn dv_snapshot(follower: &VehicleState, leaders: &LeaderSet) -> (f64, f64) {
    leaders.leaders.iter().fold((0.0, 0.0), |(ds, dot), j| {
        let out = inelastic_collision(follower.spec.mass, follower.speed, j.mass, j.speed);
        (ds.max(out.delta_v_striker), dot.max(out.delta_v_struck))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{kmh_to_ms, ms_to_kmh, EdgeId, VehicleSpec};
    use proptest::prelude::*;

    fn caps() -> AdvisoryBounds {
        AdvisoryBounds::from_kmh(23.19, 30.86).unwrap()
    }

    fn highway() -> RoadEdge {
        RoadEdge::new(EdgeId(0), 3000.0, 2, kmh_to_ms(130.0), kmh_to_ms(60.0)).unwrap()
    }

    fn vehicle(id: u64, mass: f64, vmax_kmh: f64, pos: f64, speed_kmh: f64) -> VehicleState {
        VehicleState {
            spec: VehicleSpec::new(VehicleId(id), mass, kmh_to_ms(vmax_kmh), 4.0, 2.6, 4.5).unwrap(),
            edge: EdgeId(0),
            lane: 0,
            position: pos,
            speed: kmh_to_ms(speed_kmh),
            entered_at: 0,
            exited_at: None,
        }
    }

    #[test]
    fn closing_caps_for_case_study_masses() {
        let b = caps();
        assert!((ms_to_kmh(closing_speed_cap(300.0, 20_000.0, &b)) - 23.54).abs() < 0.01);
        assert!((ms_to_kmh(closing_speed_cap(20_000.0, 300.0, &b)) - 31.32).abs() < 0.01);
        assert!((ms_to_kmh(closing_speed_cap(1500.0, 1500.0, &b)) - 46.38).abs() < 1e-9);
        assert!((ms_to_kmh(closing_speed_cap(20_000.0, 2500.0, &b)) - 34.72).abs() < 0.01);
    }

    #[test]
    fn motorcycle_behind_slow_truck() {
        let follower = vehicle(1, 300.0, 144.0, 0.0, 130.0);
        let truck = vehicle(2, 20_000.0, 60.0, 200.0, 60.0);
        let set = LeaderSet::build(&follower, [&truck], 300.0);
        assert_eq!(set.leaders.len(), 1);
        let r = speed_reference(&follower, &set, &highway(), &caps());
        assert!((ms_to_kmh(r.v_star) - 83.54).abs() < 0.01);
        assert_eq!(r.binding, Binding::DvSelf(VehicleId(2)));
    }

    #[test]
    fn truck_behind_stranded_car_is_held_at_road_minimum() {
        let follower = vehicle(1, 20_000.0, 144.0, 0.0, 130.0);
        let stranded = vehicle(2, 2500.0, 0.0, 150.0, 0.0);
        let set = LeaderSet::build(&follower, [&stranded], 300.0);
        let r = speed_reference(&follower, &set, &highway(), &caps());
        assert_eq!(r.binding, Binding::RoadMin);
        assert!((ms_to_kmh(r.v_star) - 60.0).abs() < 1e-9);
    }

    #[test]
    fn unconstrained_follower() {
        let fast = vehicle(1, 2500.0, 144.0, 0.0, 100.0);
        let r = speed_reference(&fast, &LeaderSet::empty(fast.spec.id), &highway(), &caps());
        assert_eq!(r.binding, Binding::RoadMax);
        assert!((ms_to_kmh(r.v_star) - 130.0).abs() < 1e-9);
        let slow = vehicle(1, 20_000.0, 90.0, 0.0, 80.0);
        let r = speed_reference(&slow, &LeaderSet::empty(slow.spec.id), &highway(), &caps());
        assert_eq!(r.binding, Binding::SelfMax);
        assert!((ms_to_kmh(r.v_star) - 90.0).abs() < 1e-9);
    }

    #[test]
    fn leader_set_membership() {
        let f = vehicle(1, 2500.0, 144.0, 100.0, 100.0);
        let ahead_slow = vehicle(2, 2500.0, 144.0, 250.0, 80.0);
        let ahead_fast = vehicle(3, 2500.0, 144.0, 250.0, 110.0);
        let ahead_equal = vehicle(4, 2500.0, 144.0, 250.0, 100.0);
        let too_far = vehicle(5, 2500.0, 144.0, 500.0, 10.0);
        let behind = vehicle(6, 2500.0, 144.0, 50.0, 10.0);
        let mut other_lane = vehicle(7, 2500.0, 144.0, 150.0, 10.0);
        other_lane.lane = 1;
        let mut other_edge = vehicle(8, 2500.0, 144.0, 150.0, 10.0);
        other_edge.edge = EdgeId(3);
        let alongside = vehicle(9, 2500.0, 144.0, 102.0, 10.0);
        let all = [&ahead_slow, &ahead_fast, &ahead_equal, &too_far, &behind, &other_lane, &other_edge, &alongside];
        let ids: Vec<u64> = LeaderSet::build(&f, all, 300.0).leaders.iter().map(|l| l.id.0).collect();
        assert_eq!(ids, vec![2, 7]);
    }

    #[test]
    fn snapshot_takes_componentwise_worst() {
        let f = vehicle(1, 200.0, 144.0, 0.0, 36.0 + 36.0);
        let truck = vehicle(2, 20_000.0, 144.0, 100.0, 36.0);
        let set = LeaderSet::build(&f, [&truck], 300.0);
        let (s, o) = dv_snapshot(&f, &set);
        assert!((s - 9.90099).abs() < 1e-3 && (o - 0.09901).abs() < 1e-3);
        assert_eq!(dv_snapshot(&f, &LeaderSet::empty(f.spec.id)), (0.0, 0.0));

        let f = vehicle(1, 2000.0, 144.0, 0.0, 100.0);
        let light = vehicle(2, 200.0, 144.0, 50.0, 60.0);
        let heavy = vehicle(3, 20_000.0, 144.0, 80.0, 90.0);
        let set = LeaderSet::build(&f, [&light, &heavy], 300.0);
        let (s, o) = dv_snapshot(&f, &set);
        let a = inelastic_collision(2000.0, f.speed, 200.0, light.speed);
        let b = inelastic_collision(2000.0, f.speed, 20_000.0, heavy.speed);
        assert_eq!(s, a.delta_v_striker.max(b.delta_v_striker));
        assert_eq!(o, a.delta_v_struck.max(b.delta_v_struck));
    }

    fn leaders_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
        proptest::collection::vec((100.0f64..40_000.0, 0.0f64..35.0), 0..5)
    }

    fn instance(m_i: f64, leaders: &[(f64, f64)]) -> (VehicleState, LeaderSet) {
        let f = VehicleState {
            spec: VehicleSpec::new(VehicleId(0), m_i, kmh_to_ms(144.0), 4.0, 2.0, 4.0).unwrap(),
            edge: EdgeId(0),
            lane: 0,
            position: 0.0,
            speed: 40.0,
            entered_at: 0,
            exited_at: None,
        };
        let set = LeaderSet {
            follower: VehicleId(0),
            leaders: leaders
                .iter()
                .enumerate()
                .map(|(k, &(mass, speed))| Leader {
                    id: VehicleId(k as u64 + 1),
                    mass,
                    speed,
                    gap: 10.0 + k as f64,
                })
                .collect(),
        };
        (f, set)
    }

    proptest! {
        #[test]
        fn reference_satisfies_caps(
            m_i in 100.0f64..40_000.0,
            leaders in leaders_strategy(),
            v_min in 0.0f64..20.0,
        ) {
            let edge = RoadEdge::new(EdgeId(0), 1000.0, 3, kmh_to_ms(130.0), v_min).unwrap();
            let b = caps();
            let (mut f, set) = instance(m_i, &leaders);
            let r = speed_reference(&f, &set, &edge, &b);
            prop_assert!(r.v_star <= edge.v_limit.min(f.spec.v_max_self) + 1e-12 || r.binding == Binding::RoadMin);
            prop_assert!(r.v_star >= edge.v_min);
            if r.binding != Binding::RoadMin {
                f.speed = r.v_star;
                for j in set.leaders.iter().filter(|j| j.speed < f.speed) {
                    let out = inelastic_collision(m_i, f.speed, j.mass, j.speed);
                    prop_assert!(out.delta_v_striker <= b.dv_cap_self + 1e-9);
                    prop_assert!(out.delta_v_struck <= b.dv_cap_other + 1e-9);
                }
            }
        }

        #[test]
        fn reference_monotone_in_leader_speed_and_caps(
            m_i in 100.0f64..40_000.0,
            leaders in leaders_strategy(),
            bump in 0.0f64..5.0,
            scale in 1.0f64..2.0,
            which in 0usize..5,
        ) {
            let edge = highway();
            let b = caps();
            let (f, set) = instance(m_i, &leaders);
            let base = speed_reference(&f, &set, &edge, &b).v_star;
            let mut faster = set.clone();
            if let Some(l) = faster.leaders.get_mut(which) {
                l.speed += bump;
            }
            prop_assert!(speed_reference(&f, &faster, &edge, &b).v_star >= base - 1e-12);
            let looser = AdvisoryBounds::new(b.dv_cap_self * scale, b.dv_cap_other).unwrap();
            prop_assert!(speed_reference(&f, &set, &edge, &looser).v_star >= base - 1e-12);
            let looser = AdvisoryBounds::new(b.dv_cap_self, b.dv_cap_other * scale).unwrap();
            prop_assert!(speed_reference(&f, &set, &edge, &looser).v_star >= base - 1e-12);
        }

        #[test]
        fn swapping_roles_and_caps_is_symmetric(m_i in 50.0f64..40_000.0, m_j in 50.0f64..40_000.0) {
            let b = caps();
            let swapped = AdvisoryBounds::new(b.dv_cap_other, b.dv_cap_self).unwrap();
            let a = closing_speed_cap(m_i, m_j, &b);
            let s = closing_speed_cap(m_j, m_i, &swapped);
            prop_assert!((a - s).abs() <= 1e-12 * a);
        }

        #[test]
        fn equal_masses_maximise_closing_cap_under_equal_caps(
            m_i in 50.0f64..40_000.0,
            m_j in 50.0f64..40_000.0,
            cap in 1.0f64..20.0,
        ) {
            let b = AdvisoryBounds::new(cap, cap).unwrap();
            prop_assert!(closing_speed_cap(m_i, m_j, &b) <= 2.0 * cap * (1.0 + 1e-12));
            prop_assert!((closing_speed_cap(m_i, m_i, &b) - 2.0 * cap).abs() < 1e-9);
        }

        #[test]
        fn mismatch_tightens_away_from_balanced_share(
            x1 in 0.01f64..0.99,
            x2 in 0.01f64..0.99,
        ) {
            // r̄ as a function of the striker's mass share peaks where both
            // caps bind together and falls off monotonically on either side.
            let b = caps();
            let peak = b.dv_cap_other / (b.dv_cap_self + b.dv_cap_other);
            let r = |x: f64| closing_speed_cap(x * 1000.0, (1.0 - x) * 1000.0, &b);
            let (near, far) = if (x1 - peak).abs() <= (x2 - peak).abs() { (x1, x2) } else { (x2, x1) };
            if (near - peak) * (far - peak) >= 0.0 {
                prop_assert!(r(near) >= r(far) - 1e-9);
            }
            prop_assert!(r(x1) <= b.dv_cap_self + b.dv_cap_other + 1e-9);
            prop_assert!((r(0.5) - 2.0 * b.dv_cap_self.min(b.dv_cap_other)).abs() < 1e-9);
        }
    }
}
