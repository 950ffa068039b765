use anderson_core::eigen::{self, eigh, eigvalsh, sturm_count, SpectrumMeta, SymMatrix};
use anderson_core::ensemble::{map_spectra, Parallelism};
use anderson_core::model::{
    sample_potential, DisorderLaw, DisorderSpec, Hamiltonian, LatticeCube, Potential,
};
use anderson_core::perturbation::{
    eigen_gradient, eigen_hessian, minor_lower_bound, SIMPLICITY_THRESHOLD,
};
use anderson_core::stats::{
    minami_from_counts, poisson_pmf, rescale_levels, tv_to_poisson, wegner_from_counts, Interval,
};
use proptest::prelude::*;

fn law() -> impl Strategy<Value = DisorderLaw> {
    prop_oneof![Just(DisorderLaw::Uniform), Just(DisorderLaw::Triangular)]
}

fn spec() -> impl Strategy<Value = DisorderSpec> {
    (law(), -3.0f64..3.0, 0.5f64..6.0, any::<u64>())
        .prop_map(|(law, a, w, seed)| DisorderSpec::new(law, a, a + w, seed).unwrap())
}

fn cube() -> impl Strategy<Value = LatticeCube> {
    prop_oneof![
        (1usize..30).prop_map(|l| LatticeCube::new(1, l).unwrap()),
        (1usize..4).prop_map(|l| LatticeCube::new(2, l).unwrap()),
        Just(LatticeCube::new(3, 1).unwrap()),
    ]
}

fn unit_l1(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], n).prop_filter_map(
        "nonzero",
        |mut v| {
            let s: f64 = v.iter().sum();
            if s <= 0.0 {
                return None;
            }
            v.iter_mut().for_each(|x| *x /= s);
            Some(v)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_lies_in_support_and_is_reproducible(spec in spec(), cube in cube(), r in 0u64..1000) {
        let p = sample_potential(&cube, &spec, r).unwrap();
        prop_assert!(p.values.iter().all(|&v| v >= spec.a && v <= spec.b));
        prop_assert_eq!(p, sample_potential(&cube, &spec, r).unwrap());
    }

    #[test]
    fn spectrum_is_sorted_complete_and_in_hull(spec in spec(), cube in cube(), r in 0u64..100) {
        let pot = sample_potential(&cube, &spec, r).unwrap();
        let h = Hamiltonian::assemble(&cube, &pot).unwrap();
        let s = eigen::eigenvalues(&h, SpectrumMeta::of(&pot)).unwrap();
        let (lo, hi) = spec.spectrum_hull(cube.dim());
        prop_assert_eq!(s.len(), cube.n_sites());
        prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(s.eigenvalues.iter().all(|&e| e >= lo - 1e-9 && e <= hi + 1e-9));
        // Hopping is traceless once the side exceeds 2.
        if cube.side() > 2 {
            let trace: f64 = pot.values.iter().sum();
            let sum: f64 = s.eigenvalues.iter().sum();
            prop_assert!((trace - sum).abs() < 1e-9 * (1.0 + trace.abs()));
        }
    }

    #[test]
    fn banded_and_dense_paths_agree(spec in spec(), l in 1usize..60, r in 0u64..100) {
        let cube = LatticeCube::new(1, l).unwrap();
        let pot = sample_potential(&cube, &spec, r).unwrap();
        let h = Hamiltonian::assemble(&cube, &pot).unwrap();
        let fast = eigen::eigenvalues(&h, SpectrumMeta::of(&pot)).unwrap();
        let dense = eigvalsh(&h.to_dense()).unwrap();
        for (a, b) in fast.eigenvalues.iter().zip(&dense) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn sturm_count_matches_dense(diag in prop::collection::vec(-3.0f64..3.0, 1..40), x in -5.0f64..5.0) {
        let off = vec![1.0; diag.len() - 1];
        let vals = eigvalsh(&SymMatrix::tridiagonal(&diag, &off)).unwrap();
        let below = vals.iter().filter(|&&v| v < x).count();
        // Skip draws within rounding of an eigenvalue.
        prop_assume!(vals.iter().all(|v| (v - x).abs() > 1e-9));
        prop_assert_eq!(sturm_count(&diag, &off, x), below);
    }

    #[test]
    fn eigenpairs_are_orthonormal_with_small_residual(spec in spec(), cube in cube(), r in 0u64..100) {
        let pot = sample_potential(&cube, &spec, r).unwrap();
        let h = Hamiltonian::assemble(&cube, &pot).unwrap();
        let s = eigen::eig_all(&h, SpectrumMeta::of(&pot)).unwrap();
        prop_assert!(s.basis().unwrap().orthonormality_defect() < 1e-10);
        prop_assert!(eigen::max_residual(&h, &s).unwrap() < 1e-9 * (1.0 + h.frobenius_norm()));
    }

    #[test]
    fn gradients_are_probability_vectors(spec in spec(), cube in cube(), r in 0u64..100) {
        let pot = sample_potential(&cube, &spec, r).unwrap();
        let h = Hamiltonian::assemble(&cube, &pot).unwrap();
        let s = eigen::eig_all(&h, SpectrumMeta::of(&pot)).unwrap();
        for n in 0..s.len() {
            if s.gap_to_rest(n) <= SIMPLICITY_THRESHOLD {
                continue;
            }
            let g = eigen_gradient(&s, n).unwrap();
            prop_assert!(g.gradient.iter().all(|&x| x >= 0.0));
            prop_assert!((g.l1_norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn hessian_is_symmetric_with_zero_row_sums(spec in spec(), l in 2usize..15, r in 0u64..100, pick in any::<prop::sample::Index>()) {
        let cube = LatticeCube::new(1, l).unwrap();
        let pot = sample_potential(&cube, &spec, r).unwrap();
        let h = Hamiltonian::assemble(&cube, &pot).unwrap();
        let s = eigen::eig_all(&h, SpectrumMeta::of(&pot)).unwrap();
        let n = pick.index(s.len());
        prop_assume!(s.gap_to_rest(n) > 1e-6);
        let hess = eigen_hessian(&s, n).unwrap();
        prop_assert_eq!(hess.asymmetry(), 0.0);
        // Shifting every site by the same amount moves E_n rigidly.
        let scale = 1.0 / s.gap_to_rest(n);
        for i in 0..s.len() {
            let row: f64 = hess.row(i).iter().sum();
            prop_assert!(row.abs() < 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn minor_inequality_holds((u, v) in (2usize..12).prop_flat_map(|n| (unit_l1(n), unit_l1(n)))) {
        let b = minor_lower_bound(&u, &v).unwrap();
        prop_assert!(b.holds, "{:?} {:?} {:?}", u, v, b);
    }

    #[test]
    fn rescaled_counts_match_energy_counts(spec in spec(), l in 5usize..80, r in 0u64..50, e in -2.0f64..6.0, nu in 0.01f64..1.0, lo in -20.0f64..20.0, w in 0.0f64..10.0) {
        let cube = LatticeCube::new(1, l).unwrap();
        let pot = sample_potential(&cube, &spec, r).unwrap();
        let h = Hamiltonian::assemble(&cube, &pot).unwrap();
        let s = eigen::eigenvalues(&h, SpectrumMeta::of(&pot)).unwrap();
        let p = rescale_levels(&s, e, nu).unwrap();
        let a = Interval::new(lo, lo + w);
        let direct = p.points.iter().filter(|&&x| a.contains(x)).count();
        prop_assert_eq!(p.count_in(a), direct);
        let ew = p.energy_window(a);
        let in_energy = s.eigenvalues.iter().filter(|&&x| ew.contains(x)).count();
        // Agreement up to levels sitting on the rounded window edge.
        prop_assert!((in_energy as i64 - direct as i64).abs() <= 1);
    }

    #[test]
    fn full_window_minami_identity(counts in prop::collection::vec(0u32..20, 1..50), n in 20usize..40) {
        let j = Interval::new(0.0, 1.0);
        let k = Interval::new(-10.0, 10.0);
        let full = vec![n as u32; counts.len()];
        let m = minami_from_counts(&counts, &full, j, k, n).unwrap();
        let w = wegner_from_counts(&counts, j, n);
        let total = w.get_count("total_count").unwrap();
        prop_assert_eq!(m.get_count("sum_second_factorial"), Some(total * (n as u64 - 1)));
    }

    #[test]
    fn interval_relations(a in -5.0f64..5.0, w in 0.0f64..5.0, b in -5.0f64..5.0, v in 0.0f64..5.0) {
        let i = Interval::new(a, a + w);
        let j = Interval::new(b, b + v);
        if i.is_subset_of(&j) {
            prop_assert!(i.length() <= j.length());
            prop_assert!(j.contains(i.lo) && j.contains(i.hi));
        }
        prop_assert_eq!(i.overlaps(&j), j.overlaps(&i));
        prop_assert!(i.contains(a) && i.contains(a + w));
    }

    #[test]
    fn poisson_reference_is_a_distribution(mean in 0.01f64..20.0) {
        let total: f64 = (0..200).map(|k| poisson_pmf(mean, k)).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tv_distance_is_a_probability(counts in prop::collection::vec(0u64..15, 1..200), mean in 0.1f64..5.0) {
        let tv = tv_to_poisson(&counts, mean);
        prop_assert!((0.0..=1.0).contains(&tv));
    }

    #[test]
    fn restriction_to_the_whole_box_is_the_identity(spec in spec(), l in 1usize..20, r in 0u64..20) {
        let cube = LatticeCube::new(1, l).unwrap();
        let p = sample_potential(&cube, &spec, r).unwrap();
        prop_assert_eq!(p.restrict(&[0], l).unwrap().values, p.values);
    }
}

#[test]
fn ensemble_results_do_not_depend_on_worker_count() {
    let cube = LatticeCube::new(1, 30).unwrap();
    let spec = DisorderSpec::default_uniform(5);
    let run = |w| {
        map_spectra(&cube, &spec, 40, Parallelism::new(w), |s| {
            s.eigenvalues.clone()
        })
        .unwrap()
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn free_laplacian_has_cosine_spectrum() {
    let cube = LatticeCube::new(1, 6).unwrap();
    let pot = Potential::zero(cube);
    let h = Hamiltonian::assemble(&cube, &pot).unwrap();
    let (vals, _) = eigh(&h.to_dense()).unwrap();
    let n = cube.n_sites();
    let mut exact: Vec<f64> = (0..n)
        .map(|k| 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
        .collect();
    exact.sort_by(f64::total_cmp);
    for (a, b) in vals.iter().zip(&exact) {
        assert!((a - b).abs() < 1e-12);
    }
}
