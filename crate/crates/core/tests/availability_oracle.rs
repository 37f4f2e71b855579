//! Closed-form availabilities against the sampling oracle and against
//! exhaustive enumeration of link states.

use flexprot_core::availability::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact availability by summing the probability of every up state.
fn enumerate(system: &System, probs: &[f64]) -> f64 {
    let n = probs.len();
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        let x: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        if system.structure(&x) {
            total += x.iter().zip(probs).map(|(&up, &p)| if up { p } else { 1.0 - p }).product::<f64>();
        }
    }
    total
}

fn random_links(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.5..1.0)).collect()
}

#[test]
fn closed_forms_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let n = rng.random_range(1..=6);
        let links = random_links(&mut rng, n);
        let s = System::series_of(&links);
        assert!((series_availability(&links) - enumerate(&s, &links)).abs() < 1e-12);

        let width = rng.random_range(1..=3);
        let branches: Vec<Vec<f64>> = (0..width)
            .map(|_| {
                let len = rng.random_range(1..=3);
                random_links(&mut rng, len)
            })
            .collect();
        let p = System::parallel_of(&branches);
        let flat: Vec<f64> = branches.concat();
        let closed = parallel_availability(&branches.iter().map(|b| series_availability(b)).collect::<Vec<_>>());
        assert!((closed - enumerate(&p, &flat)).abs() < 1e-12);

        let w = random_links(&mut rng, 2);
        let backup = random_links(&mut rng, 2);
        let tail = random_links(&mut rng, 2);
        let sp = System::series_parallel_of(&[(w[0], backup.clone())], &tail);
        let mut flat = vec![w[0]];
        flat.extend(&backup);
        flat.extend(&tail);
        let closed = series_parallel_availability(&[(w[0], series_availability(&backup))], &tail);
        assert!((closed - enumerate(&sp, &flat)).abs() < 1e-12);
    }
}

#[test]
fn sampling_agrees_with_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..10 {
        let links = random_links(&mut rng, 4);
        let est = monte_carlo_availability(&System::series_of(&links), 200_000, seed);
        assert!((est.estimate - series_availability(&links)).abs() <= 4.0 * est.stderr.max(1e-9));
    }
}

#[test]
fn cycle_update_keeps_product_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let a_l: f64 = rng.random_range(0.01..=1.0);
        let rest: f64 = rng.random_range(0.0..=1.0);
        let a_bp: f64 = rng.random_range(0.0..=1.0);
        let a_pp = rest * a_l;
        let (new_pp, a_pl) = ava_dcyc_update(a_pp, a_l, a_bp).unwrap();
        assert!((new_pp * a_l - a_pp * a_pl).abs() < 1e-12);
    }
}
