use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use vlp_core::decode::{classify_id, estimate_stripe_period, DecodeConfig, PeriodEstimate, StripeProfile};
use vlp_core::geometry::project_led;
use vlp_core::scene_sim::disc_projection;
use vlp_core::{LedId, LedRegistry, Pose2D, RollingShutterConfig, Scenario};

/// Rows sampled from an on/off square wave of `period` rows and phase
/// `phase` (fraction of a period).
fn square(period: f64, phase: f64, len: usize) -> StripeProfile {
    StripeProfile {
        values: (0..len)
            .map(|r| {
                let x = r as f64 / period + phase;
                if x.fract() < 0.5 { 220.0 } else { 20.0 }
            })
            .collect(),
    }
}

/// Profiles span four of the longest period tested, 64 rows. With only two
/// periods of data, sampled waves whose periods differ by more than half a
/// row can coincide, so no estimator could meet the bound there.
#[test]
fn period_within_half_a_row_on_clean_square_waves() {
    let mut worst: f64 = 0.0;
    let mut period: f64 = 4.0;
    while period <= 64.0 {
        for phase in [0.0, 0.13, 0.5, 0.77] {
            let est = estimate_stripe_period(&square(period, phase, 256), 0.0).unwrap();
            let err = (est.period_rows - period).abs();
            worst = worst.max(err);
            assert!(err <= 0.5, "period {period} phase {phase}: {est:?}");
        }
        period += 0.25;
    }
    assert!(worst > 0.0);
}

#[test]
fn lamp_sized_profiles_resolve_the_reference_periods() {
    // a lamp disc spans about 67 rows
    for period in [10.0, 16.0, 25.0] {
        for k in 0..20 {
            let est = estimate_stripe_period(&square(period, f64::from(k) / 20.0, 67), 0.4).unwrap();
            assert!((est.period_rows - period).abs() <= 0.5, "{period}: {est:?}");
        }
    }
}

proptest! {
    #[test]
    fn classification_is_scale_consistent(period in 3.0..60.0f64, conf in 0.4..1.0f64) {
        let reg = LedRegistry::reference();
        let cfg = DecodeConfig::default();
        let rs = RollingShutterConfig::default();
        let fast = RollingShutterConfig { row_readout_us: rs.row_readout_us / 2.0, ..rs };
        let a = classify_id(&PeriodEstimate { period_rows: period, confidence: conf }, &reg, &rs, &cfg);
        let b = classify_id(&PeriodEstimate { period_rows: 2.0 * period, confidence: conf }, &reg, &fast, &cfg);
        match (a, b) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
            (Err(x), Err(y)) => prop_assert_eq!(std::mem::discriminant(&x), std::mem::discriminant(&y)),
            (x, y) => prop_assert!(false, "{x:?} vs {y:?}"),
        }
    }
}

/// Lamps whose whole disc lies inside the frame, with their true centres.
fn visible(sc: &Scenario, pose: &Pose2D) -> Vec<(LedId, vlp_core::PixelPoint)> {
    let k = sc.true_intrinsics();
    let h = sc.height().unwrap();
    sc.registry
        .fixtures()
        .iter()
        .filter_map(|f| {
            let (c, r) = disc_projection(f, pose, &k, h).ok()?;
            let inside = c.i - r >= 0.0 && c.j - r >= 0.0 && c.i + r <= f64::from(k.width) && c.j + r <= f64::from(k.height);
            inside.then(|| (f.id, project_led(&f.position, pose, &k, h).unwrap()))
        })
        .collect()
}

/// Fraction of visible lamps decoded with the right id at the right place,
/// and the number of decodes that were wrong.
fn decode_score(sc: &Scenario, poses: &[(Pose2D, u64)]) -> (usize, usize, usize) {
    let scene = sc.scene().unwrap();
    let loc = sc.localizer(sc.true_intrinsics()).unwrap();
    poses
        .par_iter()
        .map(|(pose, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let frame = scene.render_random_phase(pose, &mut rng);
            let found = loc.detect(&frame, None).unwrap_or_default();
            let truth = visible(sc, pose);
            let ok = truth
                .iter()
                .filter(|(id, c)| found.iter().any(|d| d.id == *id && d.pixel_centroid.distance(c) < 3.0))
                .count();
            let wrong = found
                .iter()
                .filter(|d| !truth.iter().any(|(id, c)| d.id == *id && d.pixel_centroid.distance(c) < 3.0))
                .count();
            (truth.len(), ok, wrong)
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2))
}

fn grid_poses(n: usize, seed: u64) -> Vec<(Pose2D, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let x = 13.0 + 146.0 * (a as f64 + 0.5) / n as f64;
            let y = 13.0 + 146.0 * (b as f64 + 0.5) / n as f64;
            let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            out.push((Pose2D::new(x, y, theta), rng.random()));
        }
    }
    out
}

#[test]
fn every_lamp_identified_at_zero_noise() {
    let sc = Scenario::reference().noiseless();
    let (total, ok, wrong) = decode_score(&sc, &grid_poses(10, 1));
    assert!(total >= 250, "only {total} lamp views");
    assert_eq!((ok, wrong), (total, 0));
}

#[test]
fn identification_survives_heavy_pixel_noise() {
    let mut sc = Scenario::reference();
    sc.noise.gaussian_sigma = 10.0;
    let poses: Vec<_> = grid_poses(15, 2).into_iter().take(200).collect();
    let (total, ok, wrong) = decode_score(&sc, &poses);
    assert_eq!(wrong, 0);
    assert!(ok as f64 >= 0.99 * total as f64, "{ok}/{total}");
}
