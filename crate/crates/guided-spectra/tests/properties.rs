//! Randomized structural invariants, driven by proptest.
//!
//! Each property is an identity that must hold for every valid input, not a
//! pinned value: document round-trips, edge-index symmetries, fiber-operator
//! bounds and splits, solver count bounds and reflection symmetry, contact
//! potential closed forms, and first-order band-profile bounds.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use guided_spectra::asymptotics::wj_function;
use guided_spectra::cylinder::{
    assemble_bridge_deleted, assemble_bridge_operator, assemble_truncated_fiber,
    assemble_truncated_unperturbed, guide_laplacian, window_map, CylinderWindow,
};
use guided_spectra::document::{load_spec, serialize_spec};
use guided_spectra::feshbach::{exact_bands, q_potential};
use guided_spectra::floquet::{assemble_full_fiber, Quasimomentum};
use guided_spectra::graph::{bridge_stats, combined_kappa_plus, compute_edge_indices};
use guided_spectra::guided::{flat_bands, flat_vector_residual, sweep};
use guided_spectra::Error;

mod common;
use common::{example, random_guide, random_host};

type Complex64 = Complex<f64>;

fn square_host() -> guided_spectra::PeriodicGraphSpec {
    example("square_star", "p", 1).0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Serializing a loaded document reproduces it byte for byte.
    #[test]
    fn document_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_host(&mut rng);
        let guide = random_guide(&mut rng, 4, spec.nu());
        guide.validate(&spec).expect("generated guide is valid");
        let doc = serialize_spec(&spec, &guide);
        let (spec2, guide2) = load_spec(&doc).expect("round-trip load");
        prop_assert_eq!(doc, serialize_spec(&spec2, &guide2));
    }

    /// Every oriented edge appears with its reversal carrying the negated
    /// index, at matching multiplicity.
    #[test]
    fn oriented_reversal_negates_index(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_host(&mut rng);
        let oriented = spec.oriented_edges();
        for e in &oriented {
            let reversed: Vec<i64> = e.index.iter().map(|t| -t).collect();
            let found: u64 = oriented
                .iter()
                .filter(|r| r.from == e.to && r.to == e.from && r.index == reversed)
                .map(|r| r.multiplicity)
                .sum();
            prop_assert!(found >= e.multiplicity, "missing reversal of {e:?}");
        }
    }

    /// Edge indices depend only on cell offsets: translating both endpoints
    /// of every edge by one integer vector leaves all indices unchanged.
    #[test]
    fn edge_indices_translation_invariant(
        ends in prop::collection::vec(
            (-4.0f64..4.0, -4.0f64..4.0, -4.0f64..4.0, -4.0f64..4.0), 1..6),
        mx in -5i64..=5,
        my in -5i64..=5,
    ) {
        let edges: Vec<(Vec<f64>, Vec<f64>)> = ends
            .iter()
            .map(|&(ax, ay, bx, by)| (vec![ax, ay], vec![bx, by]))
            .collect();
        let shifted: Vec<(Vec<f64>, Vec<f64>)> = ends
            .iter()
            .map(|&(ax, ay, bx, by)| {
                (
                    vec![ax + mx as f64, ay + my as f64],
                    vec![bx + mx as f64, by + my as f64],
                )
            })
            .collect();
        prop_assert_eq!(compute_edge_indices(&edges), compute_edge_indices(&shifted));
    }

    /// Oriented bridges between attached vertices pair up with their
    /// reversals, so their count is even.
    #[test]
    fn bridge_count_between_contacts_is_even(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_host(&mut rng);
        let guide = random_guide(&mut rng, 4, spec.nu());
        guide.validate(&spec).expect("generated guide is valid");
        let stats = bridge_stats(&spec, &guide);
        prop_assert_eq!(stats.beta_01 % 2, 0, "beta_01 = {}", stats.beta_01);
    }

    /// The fiber operator is Hermitian with real spectrum in [0, 2 kappa_+]
    /// at every quasimomentum.
    #[test]
    fn fiber_spectrum_real_and_bounded(
        seed in any::<u64>(),
        q1 in -PI..PI,
        q2 in -PI..PI,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_host(&mut rng);
        let fiber = assemble_full_fiber(&spec, &Quasimomentum::new(vec![q1], vec![q2]));
        let m = fiber.matrix();
        let herm = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(herm < 1e-12);
        let vals = fiber.eigenvalues();
        let hi = 2.0 * spec.kappa_plus() as f64;
        prop_assert!(vals[0] > -1e-9, "eigenvalue {} below zero", vals[0]);
        prop_assert!(vals[vals.len() - 1] < hi + 1e-9, "eigenvalue above {hi}");
    }

    /// The fiber is 2 pi periodic in each quasimomentum component.
    #[test]
    fn fiber_phase_periodic(
        seed in any::<u64>(),
        q1 in -PI..PI,
        q2 in -PI..PI,
        axis in 0usize..2,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_host(&mut rng);
        let a = assemble_full_fiber(&spec, &Quasimomentum::new(vec![q1], vec![q2]));
        let mut shifted = [q1, q2];
        shifted[axis] += 2.0 * PI;
        let b = assemble_full_fiber(
            &spec,
            &Quasimomentum::new(vec![shifted[0]], vec![shifted[1]]),
        );
        let defect = (a.matrix() - b.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        prop_assert!(defect < 1e-12, "periodicity defect {defect:.2e}");
    }

    /// At zero quasimomentum the fiber is the real quotient Laplacian, so
    /// every row sums to zero.
    #[test]
    fn fiber_at_zero_has_zero_row_sums(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_host(&mut rng);
        let fiber = assemble_full_fiber(&spec, &Quasimomentum::new(vec![0.0], vec![0.0]));
        for row in fiber.matrix().row_iter() {
            let sum: Complex64 = row.iter().sum();
            prop_assert!(sum.norm() < 1e-9, "row sum {sum}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// The truncated fiber splits entrywise into the embedded unperturbed
    /// part plus the guide Laplacian, and independently into the
    /// bridge-deleted part plus the bridge operator.
    #[test]
    fn truncated_fiber_decompositions(seed in any::<u64>(), theta in -PI..PI) {
        let window = CylinderWindow::periodic(4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_host(&mut rng);
        let guide = random_guide(&mut rng, 3, spec.nu());
        guide.validate(&spec).expect("generated guide is valid");

        let fiber = assemble_truncated_fiber(&spec, &guide, &[theta], window)
            .expect("fiber assembly");
        let m = fiber.matrix();

        let map = window_map(&spec, &guide, window).expect("window map");
        let unperturbed = assemble_truncated_unperturbed(&spec, &[theta], window)
            .expect("unperturbed assembly");
        let host_rows = unperturbed.matrix().nrows();
        let gl = guide_laplacian(&guide);
        let mut expected = DMatrix::<Complex64>::zeros(map.size, map.size);
        expected
            .view_mut((0, 0), (host_rows, host_rows))
            .copy_from(unperturbed.matrix());
        for (gu, &ru) in map.guide_rows.iter().enumerate() {
            for (gv, &rv) in map.guide_rows.iter().enumerate() {
                expected[(ru, rv)] += Complex64::new(gl.matrix[(gu, gv)], 0.0);
            }
        }
        let defect = (m - &expected).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(defect < 1e-12, "projected-part defect {defect:.2e}");

        let gamma = assemble_bridge_deleted(&spec, &guide, window).expect("bridge-deleted");
        let beta = assemble_bridge_operator(&spec, &guide, &[theta], window)
            .expect("bridge operator");
        let bridge_defect = (m - (gamma.matrix() + beta.matrix()))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        prop_assert!(bridge_defect < 1e-12, "bridge-split defect {bridge_defect:.2e}");
    }

    /// The spectrum of the truncated fiber is symmetric under reflection of
    /// the longitudinal quasimomentum.
    #[test]
    fn fiber_spectrum_reflection_symmetric(seed in any::<u64>(), theta in 0.0..PI) {
        let window = CylinderWindow::periodic(5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_host(&mut rng);
        let guide = random_guide(&mut rng, 3, spec.nu());
        guide.validate(&spec).expect("generated guide is valid");
        let a = assemble_truncated_fiber(&spec, &guide, &[theta], window)
            .expect("fiber assembly")
            .eigenvalues();
        let b = assemble_truncated_fiber(&spec, &guide, &[-theta], window)
            .expect("mirrored assembly")
            .eigenvalues();
        let drift = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(drift < 1e-9, "reflection drift {drift:.2e}");
    }

    /// Per-theta guided eigenvalue counts never exceed the positive guide
    /// eigenvalue count p.
    #[test]
    fn guided_count_bounded_by_p(seed in any::<u64>()) {
        let spec = square_host();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let guide = random_guide(&mut rng, 4, spec.nu());
        guide.validate(&spec).expect("generated guide is valid");
        let trace = sweep(&spec, &guide, 9, CylinderWindow::periodic(6)).expect("sweep");
        for (i, vals) in trace.eigenvalues.iter().enumerate() {
            prop_assert!(
                vals.len() <= trace.p_bound,
                "theta index {i}: {} guided values exceed p = {}",
                vals.len(),
                trace.p_bound
            );
        }
    }

    /// Certified flat-band values are theta-independent eigenvalues of the
    /// raw truncated fiber, at full multiplicity.
    #[test]
    fn certified_flats_appear_at_every_theta(seed in any::<u64>(), theta in -PI..PI) {
        let window = CylinderWindow::periodic(6);
        let spec = square_host();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let guide = random_guide(&mut rng, 5, spec.nu());
        guide.validate(&spec).expect("generated guide is valid");
        let gl = guide_laplacian(&guide);
        for fb in flat_bands(&gl) {
            let mut certified = 0;
            for v in &fb.vectors {
                let res = flat_vector_residual(&spec, &guide, window, fb.value, v)
                    .expect("residual evaluation");
                if res < 1e-9 {
                    certified += 1;
                }
            }
            if certified == 0 {
                continue;
            }
            let vals = assemble_truncated_fiber(&spec, &guide, &[theta], window)
                .expect("fiber assembly")
                .eigenvalues();
            let count = vals.iter().filter(|&&x| (x - fb.value).abs() < 1e-7).count();
            prop_assert!(
                count >= certified,
                "flat {:.6} x{certified} found only x{count} at theta={theta}",
                fb.value
            );
        }
    }

    /// First-order band profiles: unit eigenvector, ordered extrema
    /// enclosing the sampled values, and width scale at most 2 beta_01.
    #[test]
    fn band_profile_bounds(seed in any::<u64>(), t1 in -PI..PI, t2 in -PI..PI) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = if seed % 2 == 0 { square_host() } else { random_host(&mut rng) };
        let guide = random_guide(&mut rng, 4, spec.nu());
        guide.validate(&spec).expect("generated guide is valid");
        let stats = bridge_stats(&spec, &guide);
        let gl = guide_laplacian(&guide);
        for j in 1..=gl.p() {
            let profile = match wj_function(&spec, &guide, j) {
                Ok(p) => p,
                Err(Error::Degenerate(_)) => continue,
                Err(e) => return Err(TestCaseError::fail(format!("profile failed: {e}"))),
            };
            prop_assert!((profile.vector.norm() - 1.0).abs() < 1e-9);
            prop_assert!(profile.w_plus >= profile.w_minus - 1e-12);
            prop_assert!(
                profile.w_dot() <= 2.0 * stats.beta_01 as f64 + 1e-9,
                "W_dot {} exceeds 2 beta_01 = {}",
                profile.w_dot(),
                2 * stats.beta_01
            );
            for theta in [t1, t2] {
                let w = profile.w(&[theta]);
                prop_assert!(w >= profile.w_minus - 1e-8 && w <= profile.w_plus + 1e-8);
            }
            // The oscillating part has zero mean: averaging W over one
            // period leaves exactly the constant term.
            let n = 256;
            let mean: f64 = (0..n)
                .map(|k| profile.w(&[-PI + 2.0 * PI * k as f64 / n as f64]))
                .sum::<f64>()
                / n as f64;
            prop_assert!(
                (mean - profile.constant).abs() < 1e-6,
                "mean {mean} vs constant {}",
                profile.constant
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The numerically evaluated contact potential matches the closed forms
    /// of the three worked families away from their poles.
    #[test]
    fn contact_potential_matches_closed_forms(
        family in 0usize..3,
        param in 1i64..=8,
        lambda in -6.0f64..26.0,
    ) {
        let (name, key) = [
            ("square_star", "p"),
            ("square_double_mandarin", "s"),
            ("square_path", "t"),
        ][family];
        let (_, guide) = example(name, key, param);
        let q = q_potential(&guide, 0).expect("contact potential");
        if q.near_pole(lambda) {
            return Ok(());
        }
        let k = param as f64;
        let (closed, denom) = match family {
            0 => (k * lambda / (lambda - 1.0), lambda - 1.0),
            1 => (2.0 * k * lambda / (lambda - k), lambda - k),
            _ => {
                let d = lambda * lambda - 3.0 * k * lambda + k * k;
                (k * lambda * (lambda - 2.0 * k) / d, d)
            }
        };
        if denom.abs() < 0.05 * k.max(1.0) {
            return Ok(());
        }
        let got = q.eval(lambda).expect("evaluation off poles");
        let scale = closed.abs().max(1.0);
        prop_assert!(
            (got - closed).abs() <= 1e-10 * scale,
            "family {name} param {param} lambda {lambda}: {got} vs {closed}"
        );
    }

    /// Exact guided bands of the worked families are ordered and narrower
    /// than twice the transverse coordination number.
    #[test]
    fn exact_band_widths_below_four(
        family in 0usize..3,
        param in 1i64..=32,
    ) {
        let (name, key) = [
            ("square_star", "p"),
            ("square_double_mandarin", "s"),
            ("square_path", "t"),
        ][family];
        let (_, guide) = example(name, key, param);
        let q = q_potential(&guide, 0).expect("contact potential");
        let bands = exact_bands(&q).expect("exact bands");
        for b in &bands {
            prop_assert!(b.lo <= b.hi + 1e-12, "inverted band [{}, {}]", b.lo, b.hi);
            prop_assert!(b.hi - b.lo < 4.0, "band width {} >= 4", b.hi - b.lo);
        }
        for pair in bands.windows(2) {
            prop_assert!(pair[0].lo <= pair[1].lo, "bands out of order");
        }
    }
}

/// Combined maximum degree dominates both the host and guide degrees; the
/// full-lattice spectral bound uses it.
#[test]
fn combined_degree_dominates_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xde6);
    for _ in 0..40 {
        let spec = random_host(&mut rng);
        let guide = random_guide(&mut rng, 4, spec.nu());
        let combined = combined_kappa_plus(&spec, &guide);
        assert!(combined >= spec.kappa_plus());
        assert!(combined >= guide.degrees().iter().copied().max().unwrap_or(0));
    }
}
