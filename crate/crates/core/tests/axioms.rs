use proptest::prelude::*;
use shaprank::partial::{shapley_partial_weighted, BandWeighting};
use shaprank::regression::{shapley_regression, RegressionConfig, Sampler};
use shaprank::sampling::{shapley_sample_permutations, SamplingConfig};
use shaprank::{
    shapley_exact_permutations, shapley_exact_subsets, CharacteristicFn, Game, SizeBand, TableGame,
};

const TOL: f64 = 1e-9;

fn table() -> impl Strategy<Value = TableGame> {
    (2usize..=7).prop_flat_map(|n| {
        prop::collection::vec(-10.0f64..10.0, 1 << n)
            .prop_map(move |v| TableGame::new(n, v).unwrap())
    })
}

fn swap_bits(s: usize, a: usize, b: usize) -> usize {
    let (ba, bb) = (s >> a & 1, s >> b & 1);
    (s & !(1 << a) & !(1 << b)) | bb << a | ba << b
}

fn exact_both(t: &TableGame) -> (Vec<f64>, Vec<f64>) {
    let g = Game::new(t.clone()).unwrap();
    (
        shapley_exact_subsets(&g).unwrap().values,
        shapley_exact_permutations(&g).unwrap().values,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn efficiency(t in table()) {
        let target = t.values()[t.values().len() - 1] - t.values()[0];
        let (a, b) = exact_both(&t);
        prop_assert!((a.iter().sum::<f64>() - target).abs() < TOL);
        prop_assert!((b.iter().sum::<f64>() - target).abs() < TOL);
    }

    #[test]
    fn symmetry(t in table(), pick in any::<(usize, usize)>()) {
        let n = t.n_players();
        let (i, j) = (pick.0 % n, pick.1 % n);
        let v = t.values();
        let sym: Vec<f64> = (0..v.len()).map(|s| (v[s] + v[swap_bits(s, i, j)]) / 2.0).collect();
        let (a, b) = exact_both(&TableGame::new(n, sym).unwrap());
        prop_assert!((a[i] - a[j]).abs() < TOL);
        prop_assert!((b[i] - b[j]).abs() < TOL);
    }

    #[test]
    fn dummy(t in table(), d in any::<usize>()) {
        // Insert a player at position d that never changes ν.
        let n = t.n_players();
        let d = d % (n + 1);
        let low = (1usize << d) - 1;
        let ext: Vec<f64> = (0..1usize << (n + 1))
            .map(|s| t.values()[(s & low) | ((s >> (d + 1)) << d)])
            .collect();
        let (a, b) = exact_both(&TableGame::new(n + 1, ext).unwrap());
        prop_assert!(a[d].abs() < TOL);
        prop_assert!(b[d].abs() < TOL);
    }

    #[test]
    fn linearity(t in table(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in 0u64..1000) {
        let n = t.n_players();
        let u = TableGame::random(n, seed).unwrap();
        let mix = t.linear_combination(alpha, &u, beta).unwrap();
        let (phi_t, _) = exact_both(&t);
        let (phi_u, _) = exact_both(&u);
        let (phi_mix, phi_mix_perm) = exact_both(&mix);
        for i in 0..n {
            let expect = alpha * phi_t[i] + beta * phi_u[i];
            prop_assert!((phi_mix[i] - expect).abs() < TOL);
            prop_assert!((phi_mix_perm[i] - expect).abs() < TOL);
        }
    }

    #[test]
    fn full_band_matches_exact(t in table()) {
        let g = Game::new(t.clone()).unwrap();
        let exact = shapley_exact_subsets(&g).unwrap().values;
        for weighting in [BandWeighting::Normalized, BandWeighting::Raw] {
            let full = shapley_partial_weighted(&g, SizeBand::full(t.n_players()), weighting).unwrap().values;
            for (a, b) in full.iter().zip(&exact) {
                prop_assert!((a - b).abs() < TOL);
            }
        }
    }

    #[test]
    fn estimators_are_efficient(t in table(), seed in any::<u64>()) {
        let g = Game::new(t.clone()).unwrap();
        let target = g.target_quantity();
        let perm = shapley_sample_permutations(&g, &SamplingConfig::new(7, seed)).unwrap();
        prop_assert!((perm.sum() - target).abs() < TOL);
        let n = t.n_players();
        let kernel = shapley_regression(&g, &RegressionConfig::new(4 * n, Sampler::SizeStratified, seed)).unwrap();
        prop_assert!((kernel.sum() - target).abs() < TOL);
    }
}
