use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use voxanon_core::pool::{draw_pseudo, io};
use voxanon_core::seed::rng_from_seed;
use voxanon_core::{AnonymizationParams, EmbeddingPool, Gender, SpeakerEmbedding};

fn pool_from(vectors: &[Vec<f64>]) -> EmbeddingPool {
    EmbeddingPool::new(
        vectors
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let g = if i % 3 == 0 {
                    Gender::Male
                } else {
                    Gender::Female
                };
                SpeakerEmbedding::new(v.clone(), format!("s{i}"), g).unwrap()
            })
            .collect(),
    )
    .unwrap()
}

/// Convex-hull membership by brute force: search barycentric weights on a
/// grid of step 1/n_avg over the sampled points for one that reproduces the
/// mean exactly.
fn in_hull(points: &[&[f64]], target: &[f64], steps: usize) -> bool {
    fn rec(
        points: &[&[f64]],
        target: &[f64],
        steps: usize,
        left: usize,
        acc: &[f64],
        k: usize,
    ) -> bool {
        if k == points.len() - 1 {
            let w = left as f64 / steps as f64;
            return acc
                .iter()
                .zip(points[k])
                .zip(target)
                .all(|((a, p), t)| (a + w * p - t).abs() < 1e-9);
        }
        for used in 0..=left {
            let w = used as f64 / steps as f64;
            let next: Vec<f64> = acc.iter().zip(points[k]).map(|(a, p)| a + w * p).collect();
            if rec(points, target, steps, left - used, &next, k + 1) {
                return true;
            }
        }
        false
    }
    rec(
        points,
        target,
        steps,
        steps,
        &mut vec![0.0; target.len()],
        0,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pseudo_mean_in_hull_of_samples(
        seed in any::<u64>(),
        vectors in proptest::collection::vec(proptest::collection::vec(-3i8..=3, 3), 6..10),
        n_avg in 1usize..4,
    ) {
        let vectors: Vec<Vec<f64>> = vectors
            .into_iter()
            .map(|v| {
                let v: Vec<f64> = v.into_iter().map(f64::from).collect();
                if v.iter().all(|&x| x == 0.0) { vec![1.0, 0.0, 0.0] } else { v }
            })
            .collect();
        let pool = pool_from(&vectors);
        let src = SpeakerEmbedding::new(vec![1.0, 2.0, 0.5], "src", Gender::Female).unwrap();
        let n_female = pool.indices_of(Gender::Female).len();
        prop_assume!(n_female >= n_avg);
        let params = AnonymizationParams { n_far: n_female.min(n_avg + 1), n_avg, seed, ..Default::default() };
        let draw = draw_pseudo(&pool, &src, &params, &mut rng_from_seed(seed)).unwrap();
        let points: Vec<&[f64]> = draw.sampled.iter().map(|&i| pool.entries()[i].vector.as_slice()).collect();
        prop_assert!(in_hull(&points, &draw.mean, n_avg));
        for &i in &draw.sampled {
            prop_assert_eq!(pool.entries()[i].gender, Gender::Female);
            prop_assert!(draw.far_set.contains(&i));
        }
    }
}

#[test]
fn store_round_trip_through_files() {
    use rand::Rng;
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let vectors: Vec<Vec<f64>> = (0..12)
        .map(|_| {
            (0..8)
                .map(|_| f64::from(r.random_range(-100i16..100)) / 8.0)
                .collect()
        })
        .collect();
    let pool = pool_from(&vectors);
    let dir = tempfile::tempdir().unwrap();
    for name in ["pool.embd", "pool.csv"] {
        let path = dir.path().join(name);
        io::save_pool(&path, &pool).unwrap();
        assert_eq!(io::load_pool(&path).unwrap(), pool);
    }
}
