//! Acceptance gate: one test per criterion, each printing a single
//! pass line with the measured value once its assertions hold.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use spatial_qkd::alphabet::{hamming, SymbolGrid};
use spatial_qkd::channel::{
    gaussian_send_distribution, Basis, ChannelModel, CrosstalkProfile, GaussianSpot,
};
use spatial_qkd::detector::{
    centered_origin, events_to_symbols, extract_events, symbol_center, synthesize_frame, EventCuts,
    FRAME_HEIGHT, FRAME_WIDTH,
};
use spatial_qkd::infotheory::{
    effective_fidelity, mi_fidelity, mi_hidden_basis, mi_neighbor, Fidelity, JointCounts,
};
use spatial_qkd::protocol::{
    binary_bit_strings, cascade_reconcile, gray_bit_strings, run_session, sift, toeplitz_hash,
    SendSpec, SessionConfig,
};
use spatial_qkd::security::{
    eve_info_finite, info_distance, rate_sweep, secret_key_rate, FiniteKeyParams,
};

const D: usize = 1024;

fn decomposition_channel() -> ChannelModel {
    let grid = SymbolGrid::standard();
    ChannelModel::new(
        grid,
        CrosstalkProfile::noise_decomposition(),
        CrosstalkProfile::noise_decomposition(),
        GaussianSpot::fitted_if(&grid),
        GaussianSpot::fitted_fi(&grid),
        1.0,
    )
    .unwrap()
}

#[test]
fn criterion_01_mutual_information_from_fidelity() {
    let v = mi_fidelity(Fidelity::new(0.687, D).unwrap(), D);
    assert!((v - 5.973).abs() < 1e-3, "{v}");
    println!("criterion 1 PASS: mi_fidelity(0.687, 1024) = {v:.4} bit");
}

#[test]
fn criterion_02_effective_fidelity_inversion() {
    let f_ii = effective_fidelity(6.75, D).unwrap().value();
    let f_ff = effective_fidelity(7.03, D).unwrap().value();
    assert!((f_ii - 0.755).abs() < 0.005, "{f_ii}");
    assert!((f_ff - 0.779).abs() < 0.005, "{f_ff}");
    println!("criterion 2 PASS: F_eff(6.75) = {f_ii:.4}, F_eff(7.03) = {f_ff:.4}");
}

#[test]
fn criterion_03_hidden_basis_information() {
    let grid = SymbolGrid::standard();
    let (p, entropy) = gaussian_send_distribution(&GaussianSpot::fitted_if(&grid), &grid);
    assert!((entropy - 9.4).abs() < 0.1, "send entropy {entropy}");
    let hb_ii = mi_hidden_basis(&p, effective_fidelity(6.75, D).unwrap()).unwrap();
    let hb_ff = mi_hidden_basis(&p, effective_fidelity(7.03, D).unwrap()).unwrap();
    assert!((hb_ii - 6.3).abs() < 0.1, "{hb_ii}");
    assert!((hb_ff - 6.6).abs() < 0.1, "{hb_ff}");
    println!(
        "criterion 3 PASS: send entropy {entropy:.3} bit, hidden-basis MI {hb_ii:.3} / {hb_ff:.3} bit"
    );
}

#[test]
fn criterion_04_monte_carlo_matches_closed_form() {
    let model = decomposition_channel();
    let grid = *model.grid();
    let mut rng = ChaCha12Rng::seed_from_u64(41);
    let n = 10_000_000usize;
    let mut counts = JointCounts::new(D);
    for i in 0..n {
        let sent = grid.symbol_from_index(i % D).unwrap();
        let got = model
            .transmit(sent, Basis::Image, Basis::Image, &mut rng)
            .unwrap();
        counts.increment(sent.index(), got.index());
    }
    let sampled = counts.mutual_information().unwrap();
    let closed = mi_neighbor(&CrosstalkProfile::noise_decomposition(), D);
    assert!(
        (sampled - closed).abs() < 0.05,
        "sampled {sampled} vs closed form {closed}"
    );
    println!(
        "criterion 4 PASS: sampled MI {sampled:.4} bit vs closed form {closed:.4} bit over 1e7 draws"
    );
}

#[test]
fn criterion_05_gray_code_benefit() {
    let grid = SymbolGrid::standard();
    let model = ChannelModel::new(
        grid,
        CrosstalkProfile::fitted_ii(),
        CrosstalkProfile::fitted_ff(),
        GaussianSpot::fitted_if(&grid),
        GaussianSpot::fitted_fi(&grid),
        1.0,
    )
    .unwrap();
    let cfg = SessionConfig {
        rounds: 200_000,
        channel: model,
        send_image: SendSpec::Uniform,
        send_fourier: SendSpec::Uniform,
        basis_bias: 0.5,
        finite_key: FiniteKeyParams::defaults(200_000),
        qber_abort_threshold: 1.0,
        master_seed: 5,
    };
    let transcript = run_session(&cfg).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(51);
    let sifted = sift(&transcript, &cfg.finite_key, &mut rng).unwrap();
    let pairs: Vec<_> = sifted
        .key_pairs
        .iter()
        .chain(&sifted.estimation_pairs)
        .copied()
        .collect();
    let (ga, gb) = gray_bit_strings(&pairs, &grid);
    let (ba, bb) = binary_bit_strings(&pairs, &grid);
    let rate = |a: &[u8], b: &[u8]| {
        a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len() as f64
    };
    let gray = rate(&ga, &gb);
    let binary = rate(&ba, &bb);
    assert!(gray < binary, "gray {gray} binary {binary}");
    assert!((0.06..=0.10).contains(&gray), "gray QBER {gray}");
    println!("criterion 5 PASS: Gray QBER {gray:.4} < binary QBER {binary:.4}");
}

#[test]
fn criterion_06_finite_key_curve_shape() {
    let i_ab = mi_neighbor(&CrosstalkProfile::noise_decomposition(), D);
    let f = effective_fidelity(i_ab, D).unwrap();
    let template = FiniteKeyParams::defaults(0);
    let grid: Vec<u64> = (0..=100)
        .map(|i| (10.0 * 10f64.powf(i as f64 * 0.11)) as u64)
        .collect();
    let (points, onset) = rate_sweep(&template, &grid, i_ab, f, D).unwrap();
    let mut last = -1.0;
    for p in &points {
        assert!(
            p.rate >= last,
            "rate not monotone at N = {}",
            p.total_rounds
        );
        last = p.rate;
    }
    let onset = onset.expect("positive rate reached");
    assert!(
        points.first().unwrap().rate == 0.0,
        "rate must start at zero"
    );

    // limit check with the statistical penalty knob at zero: the remaining
    // finite-size corrections are O(1/N)
    let zero_spread = FiniteKeyParams {
        total_rounds: 1_000_000_000_000,
        delta_f: Some(0.0),
        ..template
    };
    let at_limit = secret_key_rate(&zero_spread, i_ab, f, D).unwrap();
    let i_eve_inf = eve_info_finite(f, 0.0, f64::INFINITY, D).unwrap();
    let asymptote = template.sifting_fraction * (1.0 - template.pe_fraction) * (i_ab - i_eve_inf);
    assert!(
        (at_limit.rate - asymptote).abs() < 1e-6,
        "{} vs {asymptote}",
        at_limit.rate
    );
    println!(
        "criterion 6 PASS: zero below N* = {onset}, monotone, asymptote {asymptote:.4} bit/photon"
    );
}

#[test]
fn criterion_07_attack_information_distance() {
    let reference = info_distance(0.076, 0.01, 0.0, D, 9.4).unwrap();
    assert!((reference - 8.490).abs() < 5e-3, "{reference}");
    // epsilon grid stops where the interception fraction saturates
    let eps_grid: Vec<f64> = (0..=95).map(|i| i as f64 / 100.0).collect();
    for &sigma in &[0.005, 0.01, 0.02] {
        let mut last = f64::INFINITY;
        for &eps in &eps_grid {
            let v = info_distance(0.076, sigma, eps, D, 9.4).unwrap();
            assert!(v < last, "not decreasing at eps {eps}, sigma {sigma}");
            last = v;
        }
    }
    for &eps in &eps_grid {
        let a = info_distance(0.076, 0.005, eps, D, 9.4).unwrap();
        let b = info_distance(0.076, 0.01, eps, D, 9.4).unwrap();
        let c = info_distance(0.076, 0.02, eps, D, 9.4).unwrap();
        assert!(a > b && b > c, "sigma ordering broken at eps {eps}");
    }
    println!("criterion 7 PASS: delta(0, 0.01) = {reference:.4} bit, monotone in eps and sigma");
}

#[test]
fn criterion_08_cascade_corrects_and_leak_bounded() {
    let q: f64 = 0.08;
    let n_bits = 100_000; // 1e4 sifted symbols at 10 bits each
    let h = -(q * q.log2() + (1.0 - q) * (1.0 - q).log2());
    let mut rng = ChaCha12Rng::seed_from_u64(8);
    let mut total_leak = 0u64;
    let trials = 200;
    for trial in 0..trials {
        let alice: Vec<u8> = (0..n_bits).map(|_| rng.gen_range(0..2u8)).collect();
        let bob: Vec<u8> = alice
            .iter()
            .map(|&b| if rng.gen::<f64>() < q { b ^ 1 } else { b })
            .collect();
        let out = cascade_reconcile(&alice, &bob, q, &mut rng).unwrap();
        assert_eq!(out.corrected, alice, "residual errors in trial {trial}");
        total_leak += out.leaked_bits;
    }
    let frac = total_leak as f64 / (trials * n_bits) as f64;
    assert!(frac >= h, "leak fraction {frac} below h(0.08) = {h:.4}");
    assert!(
        frac <= 1.35 * h,
        "leak fraction {frac} above 1.35 h = {:.4}",
        1.35 * h
    );
    println!(
        "criterion 8 PASS: 200/200 sessions reconciled, leak fraction {frac:.4} in [{h:.4}, {:.4}]",
        1.35 * h
    );
}

#[test]
fn criterion_09_privacy_amplification_statistics() {
    // avalanche: a single flipped input bit toggles half the output
    let n = 256;
    let l = 128;
    let input: Vec<u8> = (0..n).map(|i| ((i * 13 + 1) % 7 < 3) as u8).collect();
    let mut flipped = input.clone();
    flipped[100] ^= 1;
    let seeds = 1000u64;
    let mut changed = 0u64;
    for seed in 0..seeds {
        let a = toeplitz_hash(&input, l, seed).unwrap();
        let b = toeplitz_hash(&flipped, l, seed).unwrap();
        changed += a.iter().zip(&b).filter(|(x, y)| x != y).count() as u64;
    }
    let avalanche = changed as f64 / (seeds * l as u64) as f64;
    assert!((avalanche - 0.5).abs() < 0.03, "avalanche {avalanche}");

    // universality: collision rate over seeds at l = 16
    let l = 16;
    let a: Vec<u8> = (0..64).map(|i| (i % 2) as u8).collect();
    let mut b = a.clone();
    b[3] ^= 1;
    b[47] ^= 1;
    let trials = 200_000u64;
    let mut collisions = 0u64;
    for seed in 0..trials {
        if toeplitz_hash(&a, l, seed).unwrap() == toeplitz_hash(&b, l, seed).unwrap() {
            collisions += 1;
        }
    }
    let p = (2.0f64).powi(-(l as i32));
    let bound = p + 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
    let rate = collisions as f64 / trials as f64;
    assert!(rate <= bound, "collision rate {rate} above {bound}");
    println!(
        "criterion 9 PASS: avalanche {avalanche:.4}, collision rate {rate:.2e} <= {bound:.2e}"
    );
}

#[test]
fn criterion_10_detector_pipeline() {
    let cuts = EventCuts::default();
    let mut rng = ChaCha12Rng::seed_from_u64(10);
    let mut noise_events = 0usize;
    for _ in 0..100 {
        let frame = synthesize_frame(&[], 0.4, &mut rng).unwrap();
        let ex = extract_events(&frame, &cuts).unwrap();
        noise_events += ex.accepted.len();
    }
    assert_eq!(noise_events, 0, "noise-only frames produced events");

    let grid = SymbolGrid::standard();
    let origin = centered_origin(&grid);
    let trials = 300;
    let mut correct = 0;
    for t in 0..trials {
        let s = grid.symbol_from_index(t * 7 % D).unwrap();
        let (r, c) = symbol_center(&grid, s, origin);
        let frame = synthesize_frame(&[(r, c, 30.0)], 0.4, &mut rng).unwrap();
        let ex = extract_events(&frame, &cuts).unwrap();
        let mapped =
            events_to_symbols(&ex.accepted, &grid, origin, FRAME_HEIGHT, FRAME_WIDTH).unwrap();
        if mapped.symbols == vec![s] {
            correct += 1;
        }
    }
    let rate = correct as f64 / trials as f64;
    assert!(rate >= 0.99, "recovery rate {rate}");
    println!("criterion 10 PASS: 0 events in 100 noise frames, symbol recovery {correct}/{trials}");
}

#[test]
fn criterion_11_alphabet_exhaustive() {
    let grid = SymbolGrid::standard();
    let mut seen = vec![false; D];
    for i in 0..D {
        let s = grid.symbol_from_index(i).unwrap();
        let w = grid.gray_encode(s);
        let back = grid.gray_decode(&w).unwrap();
        assert_eq!(back, s, "round trip failed at {i}");
        let idx = w.raw() as usize;
        assert!(!seen[idx], "codeword collision at {i}");
        seen[idx] = true;
        for n in grid.neighbors(s).nearest {
            let d = hamming(&w, &grid.gray_encode(n)).unwrap();
            assert_eq!(d, 1, "neighbor of {i} at Hamming distance {d}");
        }
    }
    assert!(seen.iter().all(|&b| b));
    println!(
        "criterion 11 PASS: Gray bijection over 1024 symbols, all neighbor pairs at distance 1"
    );
}
