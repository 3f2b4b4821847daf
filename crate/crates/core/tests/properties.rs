use std::f64::consts::SQRT_2;

use proptest::prelude::*;

use nosig::bases::{find_local_pairs, validate_unentangled, ProductBasis, ProductState};
use nosig::framefn::{evaluate, weight_check, FrameFunction};
use nosig::gleason::{classify_product_positivity, reconstruct_pvm, spanning_design, DEFAULT_HOLDOUT};
use nosig::hilbert::{hermitian_eig, tensor};
use nosig::keller::{
    basis_from_clique, clique_search, edge, qubit_state, verify_clique, CliqueCandidate, Graph, KellerVector, SearchMode,
};
use nosig::nosig::{
    box_from_operator, check_framefn, chsh_lp_ladder, chsh_optimize, pr_box, quantum_extension, qubit_realizations, singlet_box,
    standard_settings, ExtensionVerdict,
};
use nosig::orientation::{classify_orientation, kraus_factorize, OrientationClass};
use nosig::presheaf::{check_section, restrict, section_from_operator, Context, ContextFamily, ProductContext, RefinementEdge};
use nosig::random::{density_matrix, hermitian, orthonormal_basis, rng_from_seed, unit_vector};
use nosig::{ComplexVector, HermitianOperator};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn random_product_basis(dims: &[usize], seed: u64) -> ProductBasis {
    let mut rng = rng_from_seed(seed);
    ProductBasis::new(dims.iter().map(|&d| orthonormal_basis(d, &mut rng)).collect()).unwrap()
}

fn random_product_state(dims: &[usize], seed: u64) -> ProductState {
    let mut rng = rng_from_seed(seed);
    ProductState::new(dims.iter().map(|&d| unit_vector(d, &mut rng)).collect()).unwrap()
}

fn pt_both(t: &HermitianOperator) -> HermitianOperator {
    t.partial_transpose(0).unwrap().partial_transpose(1).unwrap()
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn tensor_inner_product_factorizes(seed in any::<u64>(), d1 in 1usize..5, d2 in 1usize..5) {
        let mut rng = rng_from_seed(seed);
        let (u, w): (ComplexVector, ComplexVector) = (unit_vector(d1, &mut rng), unit_vector(d1, &mut rng));
        let (v, x): (ComplexVector, ComplexVector) = (unit_vector(d2, &mut rng), unit_vector(d2, &mut rng));
        let lhs = tensor(&[u.clone(), v.clone()]).unwrap().inner(&tensor(&[w.clone(), x.clone()]).unwrap());
        let rhs = u.inner(&w) * v.inner(&x);
        prop_assert!((lhs - rhs).norm() <= 1e-12);
    }

    #[test]
    fn eigenpairs_satisfy_eigen_equation(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4) {
        let t: HermitianOperator = hermitian(&[d1, d2], &mut rng_from_seed(seed));
        let s = hermitian_eig(&t);
        prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        for (l, u) in s.eigenvalues.iter().zip(&s.eigenvectors) {
            let au = t.matrix().apply(u);
            let err = au.entries().iter().zip(u.entries()).map(|(a, b)| (a - b * l).norm()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-8, "eigen residual {err:e}");
        }
    }

    #[test]
    fn partial_transpose_preserves_trace_norm_and_global_spectrum(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4) {
        let t: HermitianOperator = hermitian(&[d1, d2], &mut rng_from_seed(seed));
        for site in 0..2 {
            let p = t.partial_transpose(site).unwrap();
            prop_assert!((p.trace() - t.trace()).abs() <= 1e-12);
            prop_assert!((p.frobenius_norm() - t.frobenius_norm()).abs() <= 1e-12);
        }
        let a = hermitian_eig(&t).eigenvalues;
        let b = hermitian_eig(&pt_both(&t)).eigenvalues;
        prop_assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-8));
    }

    #[test]
    fn operator_weight_is_trace_on_any_product_basis(seed in any::<u64>(), d1 in 2usize..4, d2 in 2usize..4) {
        let t: HermitianOperator = hermitian(&[d1, d2], &mut rng_from_seed(seed));
        let bases: Vec<ProductBasis> = (0..4).map(|k| random_product_basis(&[d1, d2], seed ^ (k + 1))).collect();
        let r = weight_check(&FrameFunction::from_operator(t.clone()), &bases).unwrap();
        prop_assert!(r.sums.iter().all(|s| (s - t.trace()).abs() <= 1e-10), "sums {:?} vs trace {}", r.sums, t.trace());
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn reconstruction_round_trip(seed in any::<u64>(), d1 in 3usize..5, d2 in 3usize..5) {
        let t: HermitianOperator = hermitian(&[d1, d2], &mut rng_from_seed(seed));
        let design = spanning_design(&[d1, d2], 1.5, seed).unwrap();
        let rec = reconstruct_pvm(&FrameFunction::from_operator(t.clone()), &design, DEFAULT_HOLDOUT).unwrap();
        prop_assert!(rec.t.sub(&t).unwrap().frobenius_norm() <= 1e-8);
    }

    #[test]
    fn unit_weight_reconstructs_unit_trace(seed in any::<u64>()) {
        let rho: HermitianOperator = density_matrix(&[3, 4], &mut rng_from_seed(seed));
        let design = spanning_design(&[3, 4], 1.5, seed.wrapping_add(1)).unwrap();
        let rec = reconstruct_pvm(&FrameFunction::from_operator(rho), &design, DEFAULT_HOLDOUT).unwrap();
        prop_assert!((rec.t.trace() - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn product_minimum_is_flip_invariant(seed in any::<u64>()) {
        let t: HermitianOperator = hermitian(&[2, 2], &mut rng_from_seed(seed));
        let base = classify_product_positivity(&t, 16, 3).unwrap().product_minimum.value;
        for site in 0..2 {
            let flipped = classify_product_positivity(&t.partial_transpose(site).unwrap(), 16, 3).unwrap().product_minimum.value;
            prop_assert!((flipped - base).abs() <= 1e-8, "site {site}: {flipped} vs {base}");
        }
    }

    #[test]
    fn operator_induced_functions_do_not_signal(seed in any::<u64>(), d1 in 2usize..4, d2 in 2usize..4) {
        let t: HermitianOperator = hermitian(&[d1, d2], &mut rng_from_seed(seed));
        let r = check_framefn(&FrameFunction::from_operator(t), 40, seed).unwrap();
        prop_assert!(r.max_discrepancy <= 1e-10);
    }

    #[test]
    fn chsh_of_states_respects_tsirelson(seed in any::<u64>()) {
        let rho: HermitianOperator = density_matrix(&[2, 2], &mut rng_from_seed(seed));
        let v = chsh_optimize(&rho, 8, seed).unwrap().value;
        prop_assert!(v <= 2.0 * SQRT_2 + 1e-8, "{v}");
    }

    #[test]
    fn orientation_is_invariant_under_global_transpose(seed in any::<u64>()) {
        let t: HermitianOperator = hermitian(&[2, 2], &mut rng_from_seed(seed));
        let a = classify_orientation(&t).unwrap();
        let b = classify_orientation(&pt_both(&t)).unwrap();
        prop_assert_eq!(a.class, b.class);
        prop_assert!(a.choi_spectrum.iter().zip(&b.choi_spectrum).all(|(x, y)| (x - y).abs() <= 1e-10));
    }

    #[test]
    fn completely_positive_states_give_nonnegative_nonsignalling_functions(seed in any::<u64>()) {
        let rho: HermitianOperator = density_matrix(&[2, 2], &mut rng_from_seed(seed));
        let c = classify_orientation(&rho).unwrap();
        prop_assert!(matches!(c.class, OrientationClass::Cp | OrientationClass::Both));
        let f = FrameFunction::from_operator(rho);
        for k in 0..32 {
            prop_assert!(evaluate(&f, &random_product_state(&[2, 2], seed ^ k)).unwrap() >= -1e-10);
        }
        prop_assert!(check_framefn(&f, 40, seed).unwrap().max_discrepancy <= 1e-10);
    }

    #[test]
    fn kraus_form_reproduces_the_map(seed in any::<u64>(), flip in any::<bool>()) {
        let rho: HermitianOperator = density_matrix(&[2, 3], &mut rng_from_seed(seed));
        let t = if flip { rho.partial_transpose(0).unwrap() } else { rho };
        let k = kraus_factorize(&t).unwrap();
        if classify_orientation(&t).unwrap().class == OrientationClass::CoCp {
            prop_assert!(k.flipped);
        }
        prop_assert!(k.reconstruction_error(&t, 8, seed).unwrap() <= 1e-8);
    }

    #[test]
    fn operator_sections_are_consistent(seed in any::<u64>()) {
        let rho: HermitianOperator = density_matrix(&[2, 3], &mut rng_from_seed(seed));
        let family = ContextFamily::seeded([2, 3], 2, seed).unwrap();
        let s = section_from_operator(&rho, &family.contexts).unwrap();
        prop_assert!(check_section(&s, &family.edges).unwrap().max_distance <= 1e-10);
        let f = FrameFunction::from_operator(rho);
        for c in &family.contexts {
            let (Some(l), Some(r)) = (c.left.vectors(), c.right.vectors()) else { continue };
            let d = s.get(&c.key()).unwrap();
            for (i, u) in l.iter().enumerate() {
                for (j, v) in r.iter().enumerate() {
                    let e = evaluate(&f, &ProductState::new(vec![u.clone(), v.clone()]).unwrap()).unwrap();
                    prop_assert_eq!(d[i][j].to_bits(), e.to_bits());
                }
            }
        }
    }

    #[test]
    fn restriction_composes(seed in any::<u64>(), split in 1usize..3) {
        let mut rng = rng_from_seed(seed);
        let left = Context::from_basis("V", &orthonormal_basis(3, &mut rng)).unwrap();
        let right = Context::from_basis("W", &orthonormal_basis(2, &mut rng)).unwrap();
        let merge: Vec<usize> = (0..3).map(|k| usize::from(k >= split)).collect();
        let coarse = left.coarsen("Vc", &merge).unwrap();
        let trivial = Context::trivial(3);
        let keep = vec![0, 1];
        let fine = ProductContext::new(left, right.clone());
        let mid = ProductContext::new(coarse, right.clone());
        let top = ProductContext::new(trivial, right);
        let e1 = RefinementEdge::new(mid.clone(), fine.clone(), [merge, keep.clone()]).unwrap();
        let e2 = RefinementEdge::new(top.clone(), mid, [vec![0, 0], keep.clone()]).unwrap();
        let direct = RefinementEdge::new(top, fine, [vec![0; 3], keep]).unwrap();
        let rho: HermitianOperator = density_matrix(&[3, 2], &mut rng);
        let s = section_from_operator(&rho, &[e1.fine().clone()]).unwrap();
        let d = s.get(&e1.fine().key()).unwrap();
        let two_step = restrict(&restrict(d, &e1).unwrap(), &e2).unwrap();
        let one_step = restrict(d, &direct).unwrap();
        for (a, b) in two_step.iter().flatten().zip(one_step.iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn keller_edges_are_symmetric(a in proptest::collection::vec(0u8..4, 5), b in proptest::collection::vec(0u8..4, 5)) {
        let (a, b) = (KellerVector::new(a).unwrap(), KellerVector::new(b).unwrap());
        for g in [Graph::G, Graph::GStar] {
            prop_assert_eq!(edge(&a, &b, g).unwrap(), edge(&b, &a, g).unwrap());
            if g == Graph::GStar && edge(&a, &b, g).unwrap() {
                prop_assert!(edge(&a, &b, Graph::G).unwrap());
            }
        }
    }

    #[test]
    fn facet_free_cliques_have_no_local_pairs(seed in any::<u64>(), n in 3usize..7) {
        // greedy G*-clique over a shuffled vertex order
        let mut order: Vec<usize> = (0..1usize << (2 * n)).collect();
        let mut rng = rng_from_seed(seed);
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut clique: Vec<KellerVector> = Vec::new();
        for idx in order {
            let v = KellerVector::from_index(idx, n);
            if clique.iter().all(|w| edge(&v, w, Graph::GStar).unwrap()) {
                clique.push(v);
            }
        }
        let c = CliqueCandidate::new(n, clique).unwrap();
        prop_assert!(verify_clique(&c, Graph::GStar).is_clique());
        let states: Vec<ProductState> = c
            .vectors()
            .iter()
            .map(|v| ProductState::new(v.coords().iter().map(|&d| qubit_state(d)).collect()).unwrap())
            .collect();
        prop_assert!(find_local_pairs(&states).is_empty());
    }

    #[test]
    fn tiling_cliques_give_valid_bases(seed in any::<u64>()) {
        let c = clique_search(4, 16, SearchMode::Heuristic, Graph::G, 200_000, seed).unwrap().unwrap();
        prop_assert!(verify_clique(&c, Graph::G).is_tiling());
        prop_assert!(validate_unentangled(&basis_from_clique(&c).unwrap()).is_valid());
    }

    #[test]
    fn exhaustive_search_ignores_seed(seed in any::<u64>()) {
        let reference = clique_search(3, 8, SearchMode::Exhaustive, Graph::G, 0, 0).unwrap();
        let other = clique_search(3, 8, SearchMode::Exhaustive, Graph::G, 0, seed).unwrap();
        prop_assert_eq!(
            reference.map(|c| c.vectors().to_vec()),
            other.map(|c| c.vectors().to_vec())
        );
    }
}

#[test]
fn lp_ladder_is_nonincreasing_along_doubling_schedule() {
    for seed in [1, 2, 3] {
        let steps = chsh_lp_ladder(standard_settings(), &[40, 80, 160, 320], seed).unwrap();
        let values: Vec<f64> = steps.iter().map(|s| s.value).collect();
        assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{values:?}");
    }
}

#[test]
fn feasible_extensions_reproduce_their_table() {
    let mut boxes = vec![singlet_box()];
    let template = pr_box();
    for seed in 0..3 {
        let rho: HermitianOperator = density_matrix(&[2, 2], &mut rng_from_seed(500 + seed));
        boxes.push(
            box_from_operator(
                &rho,
                template.settings().clone(),
                template.outcomes().clone(),
                qubit_realizations(standard_settings()).unwrap(),
            )
            .unwrap(),
        );
    }
    for b in boxes {
        let ExtensionVerdict::Feasible { t, .. } = quantum_extension(&b, 400, 9).unwrap() else {
            panic!("quantum box not feasible");
        };
        let rebuilt = box_from_operator(&t, b.settings().clone(), b.outcomes().clone(), b.realizations().unwrap().clone()).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                for oa in 0..2 {
                    for ob in 0..2 {
                        assert!((rebuilt.probability(x, y, oa, ob) - b.probability(x, y, oa, ob)).abs() <= 1e-8);
                    }
                }
            }
        }
    }
}
