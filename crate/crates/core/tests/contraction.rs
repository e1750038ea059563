use bmera::decoder::{sc_network, SC_WIDTH};
use bmera::tensor::{
    contract_pair, contract_with_order, schedule_and_contract, simplify, Contraction,
};
use bmera::{
    build_circuit, marginalize_exhaustive, Boundary, Error, Family, Tensor, TensorNetwork,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BIG: usize = 22;

fn random_priors(n: usize, rng: &mut impl Rng) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| [rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0)])
        .collect()
}

fn random_suffix(len: usize, rng: &mut impl Rng) -> Vec<u8> {
    (0..len).map(|_| rng.gen::<bool>() as u8).collect()
}

/// Unnormalized open-leg values, as logs.
fn log_entries(c: &Contraction<f64>) -> Vec<f64> {
    c.tensor
        .data()
        .iter()
        .map(|v| v.ln() + c.log_scale)
        .collect()
}

fn agree(a: &Contraction<f64>, b: &Contraction<f64>, digits: i32) -> bool {
    let tol = 10f64.powi(-digits);
    log_entries(a).iter().zip(log_entries(b)).all(|(x, y)| {
        if x.is_infinite() || y.is_infinite() {
            x == &y
        } else {
            // log difference bounds the relative difference
            (x - y).abs() < tol
        }
    })
}

fn labels_in(net: &TensorNetwork<f64>) -> Vec<usize> {
    let mut v: Vec<usize> = net
        .nodes()
        .iter()
        .flat_map(|n| n.tensor.labels().to_vec())
        .collect();
    v.sort_unstable();
    v.dedup();
    v.retain(|l| !net.open().contains(l));
    v
}

#[test]
fn simplify_preserves_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for fam in [Family::Polar, Family::BranchingMera] {
        for b in [Boundary::Periodic, Boundary::Open] {
            for l in 1..=4 {
                let c = build_circuit(fam, l, b).unwrap();
                let n = c.n();
                for i in 0..n {
                    let pri = random_priors(n, &mut rng);
                    let suffix = random_suffix(n - i - 1, &mut rng);
                    let net = sc_network(&c, &pri, &suffix, i).unwrap();
                    let simp = schedule_and_contract(&simplify(&net), SC_WIDTH).unwrap();
                    if n <= 8 {
                        let raw = schedule_and_contract(&net, BIG).unwrap();
                        assert!(agree(&raw, &simp, 12), "{fam:?} {b:?} n={n} i={i}");
                    }
                    // unnormalized brute-force sum over the free prefix
                    let ex = marginalize_exhaustive(&c, &pri, &suffix, i).unwrap();
                    for (x, y) in ex.iter().zip(log_entries(&simp)) {
                        assert!((x.ln() - y).abs() < 1e-12, "{fam:?} {b:?} n={n} i={i}");
                    }
                }
            }
        }
    }
}

#[test]
fn random_orders_agree_to_twelve_digits() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut tried = 0;
    for fam in [Family::Polar, Family::BranchingMera] {
        for l in [2, 3, 4] {
            let c = build_circuit(fam, l, Boundary::Periodic).unwrap();
            let n = c.n();
            for _ in 0..6 {
                let i = rng.gen_range(0..n);
                let pri = random_priors(n, &mut rng);
                let net = sc_network(&c, &pri, &random_suffix(n - i - 1, &mut rng), i).unwrap();
                let net = if n > 4 { simplify(&net) } else { net };
                let base = schedule_and_contract(&net, BIG).unwrap();
                let mut order = labels_in(&net);
                order.shuffle(&mut rng);
                match contract_with_order(&net, &order, BIG) {
                    Ok(other) => {
                        assert!(agree(&base, &other, 12), "{fam:?} n={n} i={i}");
                        tried += 1;
                    }
                    Err(Error::WidthExceeded { .. }) => {}
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }
    assert!(tried >= 24, "only {tried} random orders fit the cap");
}

#[test]
fn polar_width_two_and_bmera_width_four_at_1024() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for (fam, cap) in [(Family::Polar, 2), (Family::BranchingMera, SC_WIDTH)] {
        for b in [Boundary::Periodic, Boundary::Open] {
            let c = build_circuit(fam, 10, b).unwrap();
            let n = c.n();
            let pri = random_priors(n, &mut rng);
            let truth = random_suffix(n, &mut rng);
            let mut worst = 0;
            let mut max_gates = 0;
            for i in (0..n).step_by(7).chain([n - 1]) {
                let net = simplify(&sc_network(&c, &pri, &truth[i + 1..], i).unwrap());
                max_gates = max_gates.max(net.gate_count());
                let r = schedule_and_contract(&net, cap)
                    .unwrap_or_else(|e| panic!("{fam:?} {b:?} i={i}: {e}"));
                worst = worst.max(r.max_rank);
                assert!(r.tensor.data().iter().all(|v| *v >= 0.0));
            }
            assert!(worst <= cap);
            // surviving gates stay linear in n
            assert!(max_gates <= 4 * n, "{fam:?}: {max_gates} gates");
        }
    }
}

#[test]
fn width_cap_failure_names_the_step() {
    let c = build_circuit(Family::BranchingMera, 4, Boundary::Periodic).unwrap();
    let pri = vec![[0.6, 0.4]; 16];
    let net = sc_network(&c, &pri, &[], 15).unwrap();
    match schedule_and_contract(&net, 1) {
        Err(Error::WidthExceeded { rank, cap, .. }) => assert!(rank > cap),
        other => panic!("expected a width failure, got {other:?}"),
    }
}

#[test]
fn rank_six_with_rank_five() {
    let a = Tensor::new((0..6).collect(), vec![1.0; 64]).unwrap();
    let b = Tensor::new((10..15).collect(), vec![1.0; 32]).unwrap();
    let one = contract_pair(&a, &b, &[(0, 0)]).unwrap();
    assert_eq!(one.rank(), 9);
    let two = contract_pair(&a, &b, &[(0, 0), (1, 1)]).unwrap();
    assert_eq!(two.rank(), 7);
    assert!(contract_pair(&a, &b, &[(0, 0), (0, 1)]).is_err());
    assert!(contract_pair(&a, &b, &[(6, 0)]).is_err());
}

proptest! {
    #[test]
    fn pairwise_contraction_matches_brute_force(
        da in proptest::collection::vec(0.0f64..1.0, 8),
        db in proptest::collection::vec(0.0f64..1.0, 4),
    ) {
        // a(x, y, z) b(y, w), summing y
        let a = Tensor::new(vec![0, 1, 2], da.clone()).unwrap();
        let b = Tensor::new(vec![3, 4], db.clone()).unwrap();
        let r = contract_pair(&a, &b, &[(1, 0)]).unwrap();
        prop_assert_eq!(r.rank(), 3);
        for x in 0..2u8 {
            for z in 0..2u8 {
                for w in 0..2u8 {
                    let want: f64 = (0..2u8)
                        .map(|y| a.get(&[x, y, z]) * b.get(&[y, w]))
                        .sum();
                    prop_assert!((r.get(&[x, z, w]) - want).abs() < 1e-14);
                }
            }
        }
    }
}
