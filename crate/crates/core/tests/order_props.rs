use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skyrmion_core::dynamics::Snapshot;
use skyrmion_core::order::{classify_phase, compute_rdf, LabelThresholds, RdfHistogram};
use skyrmion_core::vec2::{wrap, Vec2};

const L: f64 = 36.0;

fn snap(positions: Vec<Vec2>) -> Snapshot {
    Snapshot {
        iteration: 0,
        unwrapped: positions.clone(),
        positions,
    }
}

fn rdf_of(positions: &[Vec2]) -> RdfHistogram {
    compute_rdf(&[snap(positions.to_vec())], L, LabelThresholds::default().bins()).unwrap()
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec2> {
    (0..n).map(|_| Vec2::new(rng.gen::<f64>() * L, rng.gen::<f64>() * L)).collect()
}

/// Bins whose values differ; only pairs sitting exactly on a bin edge can move under
/// rounding, so at most a couple of bins may change.
fn differing_bins(a: &RdfHistogram, b: &RdfHistogram) -> usize {
    a.g.iter().zip(&b.g).filter(|(x, y)| (*x - *y).abs() > 1e-12).count()
}

#[test]
fn uniform_points_give_flat_rdf() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let snaps: Vec<Snapshot> = (0..20).map(|_| snap(uniform(&mut rng, 129))).collect();
    let rdf = compute_rdf(&snaps, L, LabelThresholds::default().bins()).unwrap();
    let outer: Vec<f64> = (0..rdf.g.len()).filter(|&k| rdf.bin_center(k) >= 6.0).map(|k| rdf.g[k]).collect();
    let mean = outer.iter().sum::<f64>() / outer.len() as f64;
    assert!((0.9..=1.1).contains(&mean), "mean g = {mean}");
}

/// Nearly equilateral triangular lattice filling the periodic box: 26 columns by 30 rows.
fn triangular() -> (Vec<Vec2>, f64) {
    let (nx, ny) = (26, 30);
    let a = L / nx as f64;
    let row = L / ny as f64;
    let mut pts = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let shift = if j % 2 == 1 { 0.5 * a } else { 0.0 };
            pts.push(wrap(Vec2::new(i as f64 * a + shift, j as f64 * row), L));
        }
    }
    (pts, a)
}

#[test]
fn triangular_lattice_peaks_at_shell_radii() {
    let (pts, a) = triangular();
    let rdf = rdf_of(&pts);
    let w = rdf.bin_width;
    for target in [a, 3f64.sqrt() * a, 2.0 * a] {
        let centre = (target / w) as usize;
        let window = centre.saturating_sub(3)..(centre + 4).min(rdf.g.len());
        let peak = window.clone().max_by(|&x, &y| rdf.g[x].total_cmp(&rdf.g[y])).unwrap();
        assert!(
            (rdf.bin_center(peak) - target).abs() <= w,
            "peak near {target} found at {}",
            rdf.bin_center(peak)
        );
        assert!(rdf.g[peak] > 2.0, "peak at {target} too weak: {}", rdf.g[peak]);
    }
    // nothing between the origin and the first shell
    let first = (a / w) as usize;
    assert!(rdf.g[..first - 1].iter().all(|&g| g == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn rdf_ignores_translation(seed in 0u64..10_000, sx in 0.0f64..L, sy in 0.0f64..L) {
        let pts = uniform(&mut ChaCha8Rng::seed_from_u64(seed), 129);
        let moved: Vec<Vec2> = pts.iter().map(|&p| wrap(p + Vec2::new(sx, sy), L)).collect();
        prop_assert!(differing_bins(&rdf_of(&pts), &rdf_of(&moved)) <= 2);
    }

    #[test]
    fn rdf_ignores_permutation(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = uniform(&mut rng, 129);
        let mut shuffled = pts.clone();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        prop_assert_eq!(rdf_of(&pts).g, rdf_of(&shuffled).g);
    }

    #[test]
    fn rdf_ignores_quarter_turn(seed in 0u64..10_000) {
        let pts = uniform(&mut ChaCha8Rng::seed_from_u64(seed), 129);
        let turned: Vec<Vec2> = pts.iter().map(|p| wrap(Vec2::new(p.y, L - p.x), L)).collect();
        prop_assert!(differing_bins(&rdf_of(&pts), &rdf_of(&turned)) <= 2);
    }

    #[test]
    fn labels_are_monotone(s in 0.0f64..2.0, v in 0.0f64..0.01, ds in 0.0f64..1.0, dv in 0.0f64..0.01) {
        let th = LabelThresholds::default();
        let lo = classify_phase(s, v, &th).unwrap().label;
        let hi = classify_phase(s + ds, v + dv, &th).unwrap().label;
        prop_assert!(!lo.is_crystal() || hi.is_crystal());
        prop_assert!(!lo.is_moving() || hi.is_moving());
    }
}
