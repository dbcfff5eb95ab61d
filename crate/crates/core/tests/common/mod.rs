//! Shared oracles for the integration and acceptance suites. These stay
//! in the test surface on purpose: they are the independent routes the
//! closed-form implementations are checked against.

use bandsched::shortfall::ImpactParams;

/// Adaptive Simpson quadrature with interval bisection until the local
/// Richardson error estimate drops below the tolerance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let err = left + right - whole;
        if depth == 0 || err.abs() <= 15.0 * tol {
            return left + right + err / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Numerical expected shortfall of the power-law schedule under the
/// delta decay kernel: the double cost integral collapses to
/// `I0 sigma P0 V^-beta * integral |Y'(t)|^(beta+1) dt`, which is
/// integrated here directly.
pub fn delta_kernel_impact_quad(t_dur: f64, nu: f64, p: &ImpactParams, x0: f64) -> f64 {
    let rate0 = x0 * nu / t_dur;
    let exponent = (nu - 1.0) * (p.beta + 1.0);
    let shape = adaptive_simpson(
        &|t: f64| (1.0 - t / t_dur).max(0.0).powf(exponent),
        0.0,
        t_dur,
        1e-12 * t_dur,
    );
    p.i0 * p.sigma_d * p.p0 * p.v_d.powf(-p.beta) * rate0.powf(p.beta + 1.0) * shape
}

/// Numerical cost under the power-law kernel `g0 |t-s|^-gamma` as a
/// nested adaptive double integral in schedule-normalized coordinates.
/// The inner integral removes the kernel singularity with the
/// substitution `v = z^(1/(1-gamma))`.
pub fn powerlaw_kernel_impact_quad(t_dur: f64, nu: f64, p: &ImpactParams, x0: f64) -> f64 {
    let g = p.gamma;
    let b = p.beta;
    let inner_exp = (nu - 1.0) * b;
    let inner = move |tau: f64| -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        let upper = tau.powf(1.0 - g);
        adaptive_simpson(
            &|z: f64| (1.0 - tau + z.max(0.0).powf(1.0 / (1.0 - g))).powf(inner_exp),
            0.0,
            upper,
            1e-11 * upper.max(1e-6),
        ) / (1.0 - g)
    };
    let k = adaptive_simpson(
        &|tau: f64| (1.0 - tau).max(0.0).powf(nu - 1.0) * inner(tau),
        0.0,
        1.0,
        1e-9,
    );
    p.i0 * p.sigma_d * p.g0 * p.p0 * x0.powf(b + 1.0) * nu.powf(b + 1.0) * p.v_d.powf(-b)
        * t_dur.powf(1.0 - g - b)
        * k
}

/// Dense grid argmin over nu in [1.001, 10] with the given step.
pub fn grid_search_shape<F: Fn(f64) -> f64>(cost: F, step: f64) -> f64 {
    let mut best = (f64::INFINITY, 1.001);
    let mut nu = 1.001;
    while nu <= 10.0 {
        let c = cost(nu);
        if c < best.0 {
            best = (c, nu);
        }
        nu += step;
    }
    best.1
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
