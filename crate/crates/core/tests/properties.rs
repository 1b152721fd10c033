use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tipsense::collision::{impulse_ratio, CollisionParams, ControlSign};
use tipsense::geometry::Aabb;
use tipsense::kinematics::{angles_from_point, contact_transform, ContactAngles, ContactForce, RigidTransform, SENSOR_RADIUS};
use tipsense::latency::{estimate_latency, zero_phase_moving_average, LatencyOptions, TimeSeries};
use tipsense::mapping::{project_contact, project_proximity, rasterize, FingertipPose, MapPoint, PointKind, ProximityArray, ProximityLayout};
use tipsense::reactive::potential_field_command;
use tipsense::sensor::{channel_response, ContactState, PressureSensorLayout, TransferConfig};

fn rigid() -> impl Strategy<Value = RigidTransform> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, prop::array::uniform3(-1.0..1.0f64)).prop_map(|(a, b, c, t)| {
        RigidTransform::new(Rotation3::from_euler_angles(a, b, c).into_inner(), Vector3::from(t))
    })
}

fn readings() -> impl Strategy<Value = ProximityArray> {
    prop::array::uniform5(prop_oneof![Just(-1.0), 10.0..150.0f64]).prop_map(ProximityArray::from_raw)
}

fn close(a: &Vector3<f64>, b: &Vector3<f64>, tol: f64) -> bool {
    (a - b).norm() <= tol
}

proptest! {
    #[test]
    fn angles_survive_the_contact_point(theta in -0.78..0.78f64, phi in -2.3..0.78f64) {
        let t = contact_transform(ContactAngles::new(theta, phi), SENSOR_RADIUS).unwrap();
        let back = angles_from_point(&t.translation, SENSOR_RADIUS).unwrap();
        prop_assert!((back.theta - theta).abs() < 1e-9);
        prop_assert!((back.phi - phi).abs() < 1e-9);
        prop_assert!(t.is_proper(1e-12));
    }

    #[test]
    fn transform_composes_with_its_inverse(t in rigid(), p in prop::array::uniform3(-1.0..1.0f64)) {
        let p = Vector3::from(p);
        let id = t.compose(&t.inverse());
        prop_assert!(close(&id.transform_point(&p), &p, 1e-12));
    }

    #[test]
    fn rasterize_ignores_point_order(
        pts in prop::collection::vec(prop::array::uniform3(-0.5..0.5f64), 0..60),
        seed in any::<u64>(),
    ) {
        let points: Vec<MapPoint> = pts
            .iter()
            .map(|p| MapPoint { position: Vector3::from(*p), kind: PointKind::Proximity, normal: None, t: 0.0 })
            .collect();
        let mut shuffled = points.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let bounds = Aabb::new([-0.4, -0.4, -0.4], [0.4, 0.4, 0.4]);
        let a = rasterize(&points, bounds, 0.05).unwrap();
        let b = rasterize(&shuffled, bounds, 0.05).unwrap();
        prop_assert_eq!(a.occupied(), b.occupied());
    }

    #[test]
    fn proximity_points_follow_the_pose(pose in rigid(), world in rigid(), array in readings()) {
        let layout = ProximityLayout::default();
        let direct = project_proximity(&FingertipPose::new(world.compose(&pose), 0.0), &layout, &array);
        let moved = project_proximity(&FingertipPose::new(pose, 0.0), &layout, &array);
        prop_assert_eq!(direct.len(), moved.len());
        for (d, m) in direct.iter().zip(&moved) {
            prop_assert!(close(&d.position, &world.transform_point(&m.position), 1e-9));
        }
    }

    #[test]
    fn contact_points_follow_the_pose(
        pose in rigid(),
        world in rigid(),
        theta in -0.7..0.7f64,
        phi in -2.2..0.7f64,
        fz in -25.0..-2.0f64,
    ) {
        let state = ContactState::new(ContactAngles::new(theta, phi), ContactForce::new(0.0, 0.0, fz));
        let direct = project_contact(&FingertipPose::new(world.compose(&pose), 0.0), &state, 1.0, SENSOR_RADIUS).unwrap();
        let moved = project_contact(&FingertipPose::new(pose, 0.0), &state, 1.0, SENSOR_RADIUS).unwrap();
        prop_assert!(close(&direct.position, &world.transform_point(&moved.position), 1e-9));
        prop_assert!(close(&direct.normal.unwrap(), &world.transform_vector(&moved.normal.unwrap()), 1e-9));
    }

    #[test]
    fn latency_ignores_gain_and_offset(
        seed in any::<u64>(),
        shift in 0usize..40,
        gain in 0.1..20.0f64,
        offset in -50.0..50.0f64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base: Vec<f64> = (0..600).map(|_| rng.random_range(-1.0..1.0)).collect();
        let truth: Vec<f64> = base[40..].to_vec();
        let measured: Vec<f64> = base[40 - shift..base.len() - shift].to_vec();
        let scaled: Vec<f64> = measured.iter().map(|v| gain * v + offset).collect();
        let opts = LatencyOptions { max_lag_s: 0.06, refine: false };
        let ts = |v: Vec<f64>| TimeSeries::new(1000.0, 0.0, v).unwrap();
        let a = estimate_latency(&ts(truth.clone()), &ts(measured), &opts).unwrap();
        let b = estimate_latency(&ts(truth), &ts(scaled), &opts).unwrap();
        prop_assert_eq!(a.latency_s, b.latency_s);
        prop_assert!((a.latency_s - shift as f64 / 1000.0).abs() < 1e-12);
    }

    #[test]
    fn moving_average_keeps_lines(slope in -5.0..5.0f64, icept in -5.0..5.0f64, half in 0usize..6) {
        let x: Vec<f64> = (0..80).map(|i| icept + slope * i as f64).collect();
        let y = zero_phase_moving_average(&TimeSeries::new(100.0, 0.0, x.clone()).unwrap(), 2 * half + 1).unwrap();
        for (a, b) in x.iter().zip(&y.values) {
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn field_vanishes_at_threshold_and_is_continuous(
        rot in rigid(),
        mut raw in prop::array::uniform5(10.0..150.0f64),
        which in 0usize..5,
        d_thresh in 20.0..120.0f64,
    ) {
        let layout = ProximityLayout::default();
        let k = 500.0;
        for r in raw.iter_mut() {
            *r = r.max(d_thresh);
        }
        raw[which] = d_thresh;
        let at = potential_field_command(&rot.rotation, &layout, &ProximityArray::from_raw(raw), d_thresh, k);
        prop_assert!(at.norm() < 1e-12);
        raw[which] = d_thresh - 1e-6;
        let near = potential_field_command(&rot.rotation, &layout, &ProximityArray::from_raw(raw), d_thresh, k);
        prop_assert!(near.norm() <= k * 1e-9 + 1e-15);
    }

    #[test]
    fn retraction_never_adds_impulse(
        k in 500.0..5000.0f64,
        v0 in 0.05..0.5f64,
        t_l in 0.0..0.02f64,
        f_in in 0.0..20.0f64,
    ) {
        let p = CollisionParams { k, v0, t_l, f_in, control_sign: ControlSign::Retract, ..CollisionParams::nominal() };
        let r = impulse_ratio(&p).unwrap();
        prop_assert!(r.eta > 0.0 && r.eta <= 1.0 + 1e-9, "eta {}", r.eta);
        if t_l >= p.half_period() {
            prop_assert!((r.eta - 1.0).abs() < 1e-9);
        }
    }
}

fn sample_state(rng: &mut ChaCha8Rng) -> ContactState {
    ContactState::new(
        ContactAngles::new(rng.random_range(-0.78..0.78), rng.random_range(-2.35..0.78)),
        ContactForce::new(rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0), rng.random_range(-25.0..-1.0)),
    )
}

#[test]
fn distinct_contacts_give_distinct_pressures() {
    let layout = PressureSensorLayout::default();
    let cfg = TransferConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let states: Vec<ContactState> = (0..1000).map(|_| sample_state(&mut rng)).collect();
    let responses: Vec<_> = states.iter().map(|s| channel_response(&layout, &cfg, s)).collect();
    let mut min_gap = f64::INFINITY;
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            let (a, b) = (&states[i], &states[j]);
            let angle = (a.angles.theta - b.angles.theta).abs().max((a.angles.phi - b.angles.phi).abs());
            let force = (a.force.as_vector() - b.force.as_vector()).norm();
            if angle < 5f64.to_radians() && force < 1.0 {
                continue;
            }
            let gap = responses[i].iter().zip(&responses[j]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            min_gap = min_gap.min(gap);
        }
    }
    assert!(min_gap > 0.0, "min gap {min_gap}");
}

#[test]
fn response_is_locally_smooth() {
    let layout = PressureSensorLayout::default();
    let cfg = TransferConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let s = sample_state(&mut rng);
        let mut t = s.to_target();
        for v in t.iter_mut() {
            *v += rng.random_range(-1e-6..1e-6);
        }
        let a = channel_response(&layout, &cfg, &s);
        let b = channel_response(&layout, &cfg, &ContactState::from_target(&t));
        let change = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(change < 1e-3, "change {change}");
    }
}
