use bmera::ml::ErasureMl;
use bmera::sim::{
    records_to_csv, records_to_jsonl, wilson_interval, ChannelKind, DecoderKind, Prepared, BATCH,
};
use bmera::{
    build_circuit, dry_run_select, ml_erasure_decode, ml_exhaustive_decode, priors, run_sweep,
    sc_decode, summarize, transmit, Boundary, ChannelModel, Family, FrozenMask, MlErasure,
    SimRecord, SweepConfig, Symbol,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(family: Family, channel: ChannelKind, grid: Vec<f64>) -> SweepConfig {
    SweepConfig {
        family,
        n: 64,
        rate: 0.5,
        boundary: Boundary::Periodic,
        channel,
        grid,
        frames: 700,
        target_errors: None,
        decoder: DecoderKind::Sc,
        selection_p: 0.1,
        seed: 2024,
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn ml_success_contains_sc_success() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for fam in [Family::Polar, Family::BranchingMera] {
        let c = build_circuit(fam, 6, Boundary::Periodic).unwrap();
        let code = Prepared::new(&c, dry_run_select(&c, 0.1, 32).unwrap()).unwrap();
        let (mut sc_fail, mut ml_fail) = (0, 0);
        for t in 0..1500 {
            let eps = [0.3, 0.4, 0.5][t % 3];
            let (sc, ml) = code.paired_erasure_frame(eps, &mut rng).unwrap();
            assert!(sc || !ml, "{fam:?}: ML failed where SC succeeded");
            sc_fail += sc as u32;
            ml_fail += ml as u32;
        }
        assert!(ml_fail <= sc_fail);
        assert!(
            ml_fail < sc_fail,
            "{fam:?}: expected ML to recover some SC failures"
        );
    }
}

#[test]
fn erasure_ml_agrees_with_exhaustive_when_unique() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let c = build_circuit(Family::BranchingMera, 4, Boundary::Open).unwrap();
    let ch = ChannelModel::bec(0.25).unwrap();
    let mut unique = 0;
    for _ in 0..300 {
        let data: Vec<usize> = (0..16).filter(|_| rng.gen_bool(0.4)).collect();
        let f = FrozenMask::from_data_positions(16, &data).unwrap();
        let x = f
            .embed(
                &(0..data.len())
                    .map(|_| rng.gen::<bool>() as u8)
                    .collect::<Vec<_>>(),
            )
            .unwrap();
        let rx = transmit(&ch, &c.encode(&x).unwrap(), &mut rng);
        let ex = ml_exhaustive_decode(&c, &f, &priors::<f64>(&ch, &rx).unwrap()).unwrap();
        match ml_erasure_decode(&c, &f, &rx).unwrap() {
            MlErasure::Unique(w) => {
                assert_eq!(w, x);
                assert_eq!(ex, x);
                unique += 1;
            }
            MlErasure::Ambiguous(d) => {
                assert!(d > 0);
                // the guess is consistent with every unerased symbol
                let (g, free) = ErasureMl::new(&c, &f)
                    .unwrap()
                    .decode_guess_zero(&rx)
                    .unwrap();
                assert_eq!(free, d);
                let y = c.encode(&g).unwrap();
                assert!(rx
                    .iter()
                    .zip(&y)
                    .all(|(s, b)| !matches!(s, Symbol::Known(v) if v != b)));
            }
        }
    }
    assert!(unique > 50);
}

#[test]
fn exhaustive_ml_likelihood_dominates_sc() {
    // pattern-wise: the ML word is at least as likely as the SC word
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut strictly = 0;
    for fam in [Family::Polar, Family::BranchingMera] {
        let c = build_circuit(fam, 4, Boundary::Periodic).unwrap();
        for ch in [
            ChannelModel::awgn(0.9).unwrap(),
            ChannelModel::bsc(0.12).unwrap(),
        ] {
            for _ in 0..400 {
                let data: Vec<usize> = (0..16).filter(|_| rng.gen_bool(0.5)).collect();
                let f = FrozenMask::from_data_positions(16, &data).unwrap();
                let x = f
                    .embed(
                        &(0..data.len())
                            .map(|_| rng.gen::<bool>() as u8)
                            .collect::<Vec<_>>(),
                    )
                    .unwrap();
                let rx = transmit(&ch, &c.encode(&x).unwrap(), &mut rng);
                let pri = priors::<f64>(&ch, &rx).unwrap();
                let ll = |w: &[u8]| -> f64 {
                    c.encode(w)
                        .unwrap()
                        .iter()
                        .zip(&pri)
                        .map(|(b, p)| p[*b as usize].ln())
                        .sum()
                };
                let ml = ll(&ml_exhaustive_decode(&c, &f, &pri).unwrap());
                let sc = ll(&sc_decode(&c, &f, &pri).unwrap().bits);
                assert!(ml >= sc - 1e-9, "{fam:?} {ch}: {ml} < {sc}");
                strictly += u32::from(ml > sc + 1e-9);
            }
        }
    }
    assert!(strictly > 0);
}

#[test]
fn sweep_is_identical_across_thread_counts() {
    for (fam, ch, grid) in [
        (Family::BranchingMera, ChannelKind::Bec, vec![0.35, 0.45]),
        (Family::Polar, ChannelKind::Bsc, vec![0.06]),
        (Family::BranchingMera, ChannelKind::Awgn, vec![0.8]),
    ] {
        let cfg = config(fam, ch, grid);
        let one = in_pool(1, || run_sweep(&cfg).unwrap());
        let four = in_pool(4, || run_sweep(&cfg).unwrap());
        assert_eq!(records_to_csv(&one, false), records_to_csv(&four, false));
        let again = in_pool(3, || run_sweep(&cfg).unwrap());
        assert_eq!(records_to_csv(&one, false), records_to_csv(&again, false));
    }
}

#[test]
fn early_stop_lands_on_a_batch_boundary() {
    let mut cfg = config(Family::Polar, ChannelKind::Bec, vec![0.6]);
    cfg.frames = 5000;
    cfg.target_errors = Some(10);
    let r = &run_sweep(&cfg).unwrap()[0];
    assert!(r.frame_errors >= 10);
    assert_eq!(r.frames % BATCH, 0);
    assert!(r.frames < 5000);
}

#[test]
fn noise_free_points_are_error_free() {
    let cfg = config(Family::BranchingMera, ChannelKind::Bsc, vec![0.0]);
    let r = &run_sweep(&cfg).unwrap()[0];
    assert_eq!((r.frame_errors, r.bit_errors), (0, 0));
    assert_eq!(r.fer_lo, 0.0);
    assert!(r.fer_hi < 0.01);
}

#[test]
fn outputs_roundtrip() {
    let cfg = config(Family::BranchingMera, ChannelKind::Bec, vec![0.4, 0.5]);
    let recs = run_sweep(&cfg).unwrap();
    let csv = records_to_csv(&recs, false);
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().ends_with(",0"));
    let back: Vec<SimRecord> = records_to_jsonl(&recs)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(back, recs);
    let s = summarize(&recs);
    assert_eq!(s.rows.len(), 2);
    assert!(s.rows[1].fer >= s.rows[0].fer);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = config(Family::Polar, ChannelKind::Bsc, vec![0.1]);
    cfg.decoder = DecoderKind::MlErasure;
    assert!(run_sweep(&cfg).is_err());
    let mut cfg = config(Family::Polar, ChannelKind::Bec, vec![1.5]);
    assert!(run_sweep(&cfg).is_err());
    cfg.grid = vec![0.2];
    cfg.n = 48;
    assert!(run_sweep(&cfg).is_err());
}

#[test]
fn wilson_coverage() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for &(p, n) in &[(0.1, 200u32), (0.02, 500), (0.5, 60)] {
        let reps = 4000;
        let covered = (0..reps)
            .filter(|_| {
                let x = (0..n).filter(|_| rng.gen_bool(p)).count() as f64;
                let (lo, hi) = wilson_interval(x, n as f64);
                lo <= p && p <= hi
            })
            .count();
        let cov = covered as f64 / reps as f64;
        assert!(cov > 0.92, "p={p} n={n}: coverage {cov}");
    }
}

proptest! {
    #[test]
    fn wilson_contains_the_estimate(x in 0u32..1000, extra in 0u32..1000) {
        let n = (x + extra).max(1) as f64;
        let x = x.min(n as u32) as f64;
        let (lo, hi) = wilson_interval(x, n);
        prop_assert!(0.0 <= lo && lo <= x / n + 1e-12);
        prop_assert!(x / n <= hi + 1e-12 && hi <= 1.0);
    }
}
