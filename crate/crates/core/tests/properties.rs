use kwe_core::collision::{collision_piece, conservation, full_collision, full_combined, gain};
use kwe_core::datum::Profile;
use kwe_core::kernel::{ChannelId, KernelParams, PieceId};
use kwe_core::quadrature::QuadConfig;
use proptest::prelude::*;

fn cfg() -> QuadConfig {
    QuadConfig::default().with_rel_tol(1e-8)
}

fn p() -> KernelParams {
    KernelParams::new(0.5, 8.0).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-300
}

#[test]
fn pieces_are_linear_in_each_slot() {
    let f = Profile::power_law(8.0);
    let g = Profile::rayleigh_jeans(2.0, 1.0);
    for c in ChannelId::ALL {
        for piece in PieceId::ALL {
            let base = collision_piece(&p(), c, piece, &f, &g, &f, 3.0, &cfg()).unwrap().value;
            let scaled = [
                collision_piece(&p(), c, piece, &f.clone().scaled(2.5), &g, &f, 3.0, &cfg()).unwrap().value,
                collision_piece(&p(), c, piece, &f, &g.clone().scaled(2.5), &f, 3.0, &cfg()).unwrap().value,
                collision_piece(&p(), c, piece, &f, &g, &f.clone().scaled(2.5), 3.0, &cfg()).unwrap().value,
            ];
            for s in scaled {
                assert!(close(s, 2.5 * base, 1e-7), "{c:?} {piece:?}: {s} vs {}", 2.5 * base);
            }
        }
    }
}

#[test]
fn gridded_copy_gives_same_piece() {
    let f = Profile::power_law(8.0);
    let g = Profile::power_law(10.0);
    let both = Profile::Gridded(
        kwe_core::datum::GriddedProfile::sample(
            &Profile::power_law(8.0),
            &kwe_core::datum::GeometricGrid::new(1e-2, 1e4, 16).unwrap(),
            -4.0,
        )
        .unwrap(),
    );
    // f and its gridded copy agree to interpolation accuracy, so the
    // operator does too.
    let a = collision_piece(&p(), ChannelId::C234, PieceId::D3, &f, &g, &f, 2.0, &cfg()).unwrap().value;
    let b = collision_piece(&p(), ChannelId::C234, PieceId::D3, &both, &g, &both, 2.0, &cfg()).unwrap().value;
    assert!(close(a, b, 1e-3), "{a} vs {b}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pieces_are_monotone(extra in 0.01f64..2.0, w in 0.1f64..50.0, c_idx in 0usize..4, piece_idx in 0usize..4) {
        let c = ChannelId::ALL[c_idx];
        let piece = PieceId::ALL[piece_idx];
        let f = Profile::power_law(8.0);
        let bigger = Profile::power_law(7.0).scaled(1.0 + extra);
        let lo = collision_piece(&p(), c, piece, &f, &f, &f, w, &cfg()).unwrap().value;
        let hi = collision_piece(&p(), c, piece, &bigger, &bigger, &bigger, w, &cfg()).unwrap().value;
        prop_assert!(lo >= 0.0);
        prop_assert!(hi >= lo * (1.0 - 1e-8), "{} < {}", hi, lo);
    }

    #[test]
    fn gain_is_nonnegative_and_bounds_full(w in 0.05f64..1e3) {
        let n = Profile::power_law(8.0);
        let g = gain(&p(), &n, w, &cfg()).unwrap();
        let full = full_collision(&p(), &n, w, &cfg()).unwrap();
        prop_assert!(g.value > 0.0);
        prop_assert!(close(g.value, full.gain, 1e-6));
        prop_assert!(full.full <= full.gain);
    }
}

#[test]
fn split_and_combined_passes_agree() {
    let n = Profile::power_law(8.0);
    for w in [0.3, 1.0, 5.0, 30.0] {
        let split = full_collision(&p(), &n, w, &cfg()).unwrap();
        let comb = full_combined(&p(), &n, w, &cfg()).unwrap();
        assert!(split.resolved, "ω₁ = {w}");
        let tol = 10.0 * (split.err_estimate + comb.err_estimate);
        assert!((split.full - comb.value).abs() <= tol, "ω₁ = {w}: {} vs {}", split.full, comb.value);
    }
}

#[test]
fn rayleigh_jeans_is_stationary() {
    let rj = Profile::rayleigh_jeans(1.0, 3.0);
    let cfg = cfg().with_omega_max(1e4);
    for w in [0.2, 2.0, 20.0] {
        let c = full_combined(&p(), &rj, w, &cfg).unwrap();
        let scale = gain(&p(), &rj, w, &cfg).unwrap().value;
        assert!(c.value.abs() <= 1e-10 * scale, "ω₁ = {w}: {} against gain {scale}", c.value);
    }
}

#[test]
fn bump_conserves_waveaction_and_energy() {
    let bump = Profile::Bump {
        center: 1.5,
        half_width: 0.5,
        amplitude: 2.0,
    };
    let breaks = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.5];
    let c = conservation(&KernelParams::new(0.0, 8.0).unwrap(), &bump, &breaks, &QuadConfig::default().with_rel_tol(1e-8))
        .unwrap();
    assert!(c.waveaction.magnitude > 0.0 && c.energy.magnitude > 0.0);
    assert!(c.waveaction.ratio < 1e-3, "{:?}", c.waveaction);
    assert!(c.energy.ratio < 1e-3, "{:?}", c.energy);
}
