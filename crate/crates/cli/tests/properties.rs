use num_complex::Complex64;
use proptest::prelude::*;

use rayzero::catalog::{family_exact, random_instances};
use rayzero::scalar::rat;
use rayzero::threshold::{eigenspaces, is_annihilated, ThresholdKind};
use rayzero_cli::examples::{spherical_dft, spider_hamiltonian};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dimensions_add_up_to_the_ray_count(seed in any::<u64>()) {
        for inst in random_instances(3, seed) {
            let model = inst.model();
            let report = eigenspaces(&model, &inst.perturbation).unwrap();
            prop_assert_eq!(report.dim_nonresonance() + report.dim_resonance(), inst.graph.ray_count());
            for f in report.all_functions() {
                prop_assert!(is_annihilated(&model, &inst.perturbation, f), "{}", inst.name);
            }
        }
    }

    /// `2τ² = E` puts the family on a threshold resonance; nearby it is regular.
    #[test]
    fn family_resonates_exactly_on_the_curve(p in 1i64..6, q in 1i64..6, shift in 1i64..4) {
        let tau = rat(p, q);
        let on = rat(2, 1) * tau.clone() * tau.clone();
        let kind = |e| {
            let inst = family_exact(&e, &tau).unwrap();
            eigenspaces(&inst.model(), &inst.perturbation).unwrap().kind
        };
        prop_assert_ne!(kind(on.clone()), ThresholdKind::Regular);
        prop_assert_eq!(kind(on + rat(shift, 7)), ThresholdKind::Regular);
    }

    /// Rotation invariance makes the Fourier conjugate block diagonal for any weight.
    #[test]
    fn spider_web_blocks_decouple_for_any_weight(
        n_rays in 2usize..6,
        weights in prop::collection::vec(0.0f64..2.0, 6),
    ) {
        let cutoff = weights.len();
        let h = spider_hamiltonian(n_rays, cutoff, |n| weights[n - 1]);
        let f = spherical_dft(n_rays, cutoff);
        let dim = h.len();
        let block = |i: usize| if i == 0 { n_rays } else { (i - 1) % n_rays + 1 };
        for i in 0..dim {
            for j in 0..dim {
                if block(i) == block(j) {
                    continue;
                }
                let t: Complex64 = (0..dim)
                    .flat_map(|a| (0..dim).map(move |b| (a, b)))
                    .map(|(a, b)| f[i][a] * h[a][b] * f[j][b].conj())
                    .sum();
                prop_assert!(t.norm() <= 1e-12, "T[{i},{j}] = {t}");
            }
        }
    }
}
