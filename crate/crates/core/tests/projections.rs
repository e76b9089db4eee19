use szego_core::kernel::{szego_kernel_eval, SzegoKernel};
use szego_core::projection::{lift_norm_identity, szego_project, BoundaryFunction, BoundaryTerm, MonomialExpansion};
use szego_core::quad::{integrate_finite, PrecCtx};
use szego_core::real::{Complex, Real};
use szego_core::weight::{grad_norm_sq, phi, WeightParams};

#[test]
fn lift_norm_identity_at_p4() {
    let params = WeightParams::standard();
    let ctx = PrecCtx::new(192, 1e-24, 12).unwrap();
    let mut f = MonomialExpansion::monomial(2, 0, 192);
    f.add_term(0, 1, &Complex::one(192));
    let r = lift_norm_identity(&params, &f, &Real::from_u64(4, 192), &ctx).unwrap();
    assert!(r.rel_diff <= 1e-12, "{:e}", r.rel_diff);
    assert!(r.boundary_side.is_positive());
}

/// `∫_{bΩ} S(z, ζ) e^{iθ} dσ(ζ)` by trapezoid rules in both angles and tanh-sinh in the radius.
#[test]
fn szego_projection_of_first_frequency_matches_kernel_integral() {
    const BITS: usize = 128;
    let params = WeightParams::standard();
    let ctx = PrecCtx::new(BITS, 1e-14, 9).unwrap();
    let kernel = SzegoKernel::build(&params, 20, 60, &ctx, None).unwrap();
    let z1 = Complex::from_f64(0.1, 0.05, BITS);
    let z2 = Complex::from_polar(&(phi(&params, &z1.abs()) * Real::from_f64(0.02, BITS)), &Real::from_f64(0.3, BITS));

    let (m1, m2) = (16usize, 8usize);
    let two_pi = Real::pi(BITS) * Real::from_u64(2, BITS);
    let one = Real::one(BITS);
    let integral = |r: &Real| -> Complex {
        let ph = phi(&params, r);
        if ph.is_zero() {
            return Complex::zero(BITS);
        }
        let mut acc = Complex::zero(BITS);
        for i in 0..m1 {
            let t1 = Complex::from_polar(r, &(&two_pi * &Real::ratio(i as i64, m1 as i64, BITS)));
            let ph1 = phi(&params, &t1.abs());
            for k in 0..m2 {
                let theta = &two_pi * &Real::ratio(k as i64, m2 as i64, BITS);
                let t2 = Complex::from_polar(&ph1, &theta);
                let s = szego_kernel_eval(&kernel, (&z1, &z2), (&t1, &t2), 1e-13).unwrap();
                acc += &(&s.value * &Complex::from_polar(&one, &theta));
            }
        }
        let surface = r * &ph * (&one + &grad_norm_sq(&params, r)).sqrt();
        acc.scale(&(&(&two_pi * &two_pi) / &Real::from_u64((m1 * m2) as u64, BITS))).scale(&surface)
    };
    let zero = Real::zero(BITS);
    let re = integrate_finite(|r: &Real| integral(r).re, &zero, &one, &ctx).unwrap();
    let im = integrate_finite(|r: &Real| integral(r).im, &zero, &one, &ctx).unwrap();
    let by_quadrature = Complex::new(re.value, im.value);

    let f = BoundaryFunction::new(vec![BoundaryTerm { k: 1, a: 0, b: 0, coeff: Complex::one(BITS) }]).unwrap();
    let closed = szego_project(&params, &f, &kernel.tables, &ctx).unwrap();
    assert_eq!(closed.slots.keys().copied().collect::<Vec<_>>(), vec![1]);
    let want = closed.eval(&z1, &z2);
    let rel = ((&by_quadrature - &want).abs() / want.abs()).to_f64();
    assert!(rel < 1e-8, "rel {rel:e}");
}
