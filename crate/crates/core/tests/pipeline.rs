use wzlvq::analysis::{
    beta_upper_bound, empirical_rate, figure_of_merit, high_rate_approx, mc_distortion, predicted_alpha,
    BetaBoundParams, FineVariant, SourceParams,
};
use wzlvq::codec::{rho_from_gap, scale_schedule, train_matched_fine};
use wzlvq::lattice::hexagonal_second_moment;
use wzlvq::mc::stream_rng;
use wzlvq::sources::{sample_pair, GaussianPairSpec};
use wzlvq::sublattice::{eisenstein_similarity, scaling_similarity};
use wzlvq::{Lattice, MatchedCodec, SideInfoCodec, Sublattice, WzLvq};

fn hex_codec(a: i64, b: i64, s: f64) -> WzLvq {
    let l = Lattice::hexagonal_normalized();
    let kappa = eisenstein_similarity(&l, a, b).unwrap();
    WzLvq::new(Sublattice::new(l, kappa).unwrap(), s).unwrap()
}

#[test]
fn hexagonal_codec_end_to_end() {
    let rho = rho_from_gap(1e-2);
    let q = hex_codec(5, 1, scale_schedule(rho, 1.0).unwrap());
    assert_eq!(q.index(), 21);
    let spec = GaussianPairSpec::new(1.0, 1.0, rho, 2).unwrap();
    let mut rng = stream_rng(1, 0);
    for _ in 0..2000 {
        let (x, y) = sample_pair(&spec, &mut rng);
        let k = q.encode(&x).unwrap();
        assert_eq!(k, q.encode_two_step(&x).unwrap());
        let xhat = q.decode(k, &y).unwrap();
        let d2: f64 = x.iter().zip(&xhat).map(|(a, b)| (a - b) * (a - b)).sum();
        // correct decodes land on the fine point, errors at least a coarse step away
        if q.decode_coords(k, &y).unwrap() == q.fine().nearest_coords(&x) {
            assert!(d2 <= q.scale() * q.scale());
        }
    }
    let src = SourceParams::joint(1.0, 1.0, rho);
    let rep = mc_distortion(&q, &src, 200_000, 2).unwrap();
    assert!(rep.recombination_residual() < 1e-12);
    assert!((rep.alpha + rep.beta - rep.d_bar).abs() < 1e-12);
    let expect = hexagonal_second_moment() * q.scale() * q.scale();
    assert!((rep.mse_correct - expect).abs() < 4.0 * rep.d_bar_stderr + 0.02 * expect);
    let rate = empirical_rate(&q, &src, 200_000, 3).unwrap();
    assert!((rate.empirical_entropy_rate - high_rate_approx(21, 2)).abs() < 0.02 * high_rate_approx(21, 2));
}

#[test]
fn matched_codebook_beats_lattice_at_high_correlation() {
    let rho = rho_from_gap(1e-3);
    let z = Lattice::integer(1).unwrap();
    let q = WzLvq::new(
        Sublattice::new(z.clone(), scaling_similarity(&z, 32).unwrap()).unwrap(),
        scale_schedule(rho, 1.0).unwrap(),
    )
    .unwrap();
    let trace = train_matched_fine(&q, rho, 1.0, 100_000, 40, 5).unwrap();
    assert!(trace.distortion.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    let m = MatchedCodec::new(&q, trace.codebook).unwrap();
    let src = SourceParams::pinned(1.0, rho);
    let lat = mc_distortion(&q, &src, 100_000, 6).unwrap();
    let mat = mc_distortion(&m, &src, 100_000, 6).unwrap();
    assert!(mat.d_bar < lat.d_bar / 100.0);
    let rate = high_rate_approx(32, 1);
    let fom = figure_of_merit(mat.d_bar, 1.0, rho, rate);
    assert!(fom > 1.0 && fom < 4.0, "figure of merit {fom}");
    let pred = predicted_alpha(1, 32, 1.0, rho, FineVariant::Matched, q.scale(), 1.0 / 12.0);
    assert!((mat.alpha - pred).abs() < 0.25 * pred);
}

#[test]
fn reference_equals_fine_quantization_for_every_codec() {
    let q = hex_codec(2, 1, 0.4);
    let mut rng = stream_rng(9, 0);
    for _ in 0..1000 {
        let (x, _) = sample_pair(&GaussianPairSpec::new(3.0, 3.0, 0.0, 2).unwrap(), &mut rng);
        let r = q.reference(&x);
        let f = q.fine_point(&x);
        assert!(r.iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-9));
    }
}

#[test]
fn error_excess_bound_decreases_along_schedule() {
    let mut prev = f64::INFINITY;
    for gap in [1e-1, 1e-2, 1e-3] {
        let rho = rho_from_gap(gap);
        let q = hex_codec(5, 1, scale_schedule(rho, 1.0).unwrap());
        let b = beta_upper_bound(&BetaBoundParams::for_codec(&q, 1.0, rho).unwrap());
        assert!(b < prev);
        prev = b;
    }
}
