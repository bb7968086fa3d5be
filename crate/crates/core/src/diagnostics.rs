//! Exact and empirical variances of the two Loschmidt-amplitude estimators:
//! the sampling strategy `l(x) = <psi|U|x> / <psi|x>` with `x ~ |psi(x)|^2`, and the
//! alternative `f(y, x)` with `y ~ |<y|U|x>|^2`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::eigen::DenseEigen;
use crate::emulator::{keyed_rng, Categorical, Domain, SUPPORT_EPS};
use crate::error::{Error, Result};
use crate::parallel;

/// Largest dimension enumerated exactly.
pub const ENUMERATION_CAP: usize = 2048;

/// Amplitudes with magnitude below this are outside the support of `psi_A`.
const AMPLITUDE_EPS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    pub t: f64,
    pub n_draws: usize,
    /// Sample variance of `n_draws` independent estimator draws; `NaN` when none.
    pub empirical_var: f64,
    /// Closed-form prediction.
    pub predicted_var: f64,
    /// Variance from exact enumeration over the estimator's distribution.
    pub exact_var: f64,
    /// Mean of the estimator by exact enumeration.
    pub exact_mean: (f64, f64),
    /// `dim S_y` for every basis state `y`.
    pub support_profile: Vec<usize>,
    /// `<psi|U(t)|psi>`.
    pub l_a_exact: (f64, f64),
}

fn c2(z: Complex64) -> (f64, f64) {
    (z.re, z.im)
}

/// Dense `U(t) = V e^{-i Lambda t} V^T`, row-major complex.
pub fn dense_propagator(eig: &DenseEigen, t: f64) -> Result<Vec<Complex64>> {
    let d = eig.dim();
    if d > ENUMERATION_CAP {
        return Err(Error::SizeCap {
            what: "exact enumeration",
            dim: d,
            cap: ENUMERATION_CAP,
        });
    }
    let v = &eig.vectors;
    let mut vc = v.clone();
    let mut vs = v.clone();
    for (n, &l) in eig.values.iter().enumerate() {
        let (s, c) = (-l * t).sin_cos();
        vc.column_mut(n).scale_mut(c);
        vs.column_mut(n).scale_mut(s);
    }
    let re: DMatrix<f64> = vc * v.transpose();
    let im: DMatrix<f64> = vs * v.transpose();
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            out.push(Complex64::new(re[(i, j)], im[(i, j)]));
        }
    }
    Ok(out)
}

fn mean_var(xs: &[Complex64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let n = xs.len() as f64;
    let mean: Complex64 = xs.iter().sum::<Complex64>() / n;
    xs.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (n - 1.0)
}

fn profile(u: &[Complex64], d: usize, eps: f64) -> Vec<usize> {
    (0..d)
        .map(|y| (0..d).filter(|&x| u[y * d + x].norm_sqr() > eps).count())
        .collect()
}

/// Sampling-strategy variance by enumeration over `supp(psi)`, against `1 - |L_A|^2`.
///
/// The two agree when `U(t)^† psi` stays inside the span of `supp(psi)`, in
/// particular when `psi` has full support.
pub fn sampling_strategy_variance(
    psi: &[Complex64],
    eig: &DenseEigen,
    t: f64,
    n_draws: usize,
    seed: u64,
) -> Result<VarianceReport> {
    let d = eig.dim();
    let u = dense_propagator(eig, t)?;
    // l(x) = sum_y psi*(y) U_yx / psi*(x)
    let ell: Vec<Option<Complex64>> = (0..d)
        .map(|x| {
            (psi[x].norm() >= AMPLITUDE_EPS).then(|| {
                let s: Complex64 = (0..d).map(|y| psi[y].conj() * u[y * d + x]).sum();
                s / psi[x].conj()
            })
        })
        .collect();
    let mut mean = Complex64::new(0.0, 0.0);
    let mut second = 0.0;
    for x in 0..d {
        if let Some(l) = ell[x] {
            let p = psi[x].norm_sqr();
            mean += p * l;
            second += p * l.norm_sqr();
        }
    }
    let l_a: Complex64 = (0..d)
        .map(|x| psi[x].conj() * (0..d).map(|y| u[x * d + y] * psi[y]).sum::<Complex64>())
        .sum();
    let empirical_var = if n_draws > 0 {
        let cat = Categorical::new(psi.iter().map(|a| a.norm_sqr())).ok_or(Error::ZeroPerturbation { norm2: 0.0 })?;
        let mut rng = keyed_rng(seed, Domain::Diagnostics, 0, t.to_bits());
        let draws: Vec<Complex64> = (0..n_draws)
            .map(|_| ell[cat.sample(&mut rng)].expect("sampled from the support"))
            .collect();
        mean_var(&draws)
    } else {
        f64::NAN
    };
    Ok(VarianceReport {
        t,
        n_draws,
        empirical_var,
        predicted_var: 1.0 - l_a.norm_sqr(),
        exact_var: second - mean.norm_sqr(),
        exact_mean: c2(mean),
        support_profile: profile(&u, d, SUPPORT_EPS),
        l_a_exact: c2(l_a),
    })
}

/// `f(y, x) = psi*(y) / (psi*(x) conj(<y|U|x>))`; unbiased for `L_A` under
/// `x ~ |psi(x)|^2`, `y ~ |<y|U|x>|^2`.
pub fn alt_estimator_value(psi_x: Complex64, psi_y: Complex64, u_yx: Complex64) -> Result<Complex64> {
    if u_yx.norm_sqr() == 0.0 || psi_x.norm() < AMPLITUDE_EPS {
        return Err(Error::VanishingTransition { x: 0, y: 0 });
    }
    Ok(psi_y.conj() / (psi_x.conj() * u_yx.conj()))
}

/// Alternative-estimator variance by enumeration over `(x, y)` pairs, against
/// `sum_y p(y) dim S_y - |L_A|^2` with `dim S_y = #{x in supp(psi) : |<x|U|y>|^2 > eps}`.
/// `support_profile` reports the unrestricted count.
///
/// Transitions with `|<y|U|x>|^2 <= eps` are treated as exact zeros both here and in
/// the sampler, so the estimator's distribution and `dim S_y` share one support.
pub fn alt_estimator_variance(
    psi: &[Complex64],
    eig: &DenseEigen,
    t: f64,
    n_draws: usize,
    seed: u64,
    eps: f64,
) -> Result<VarianceReport> {
    let d = eig.dim();
    let u = dense_propagator(eig, t)?;
    let support: Vec<usize> = (0..d).filter(|&x| psi[x].norm() >= AMPLITUDE_EPS).collect();
    let per_x = parallel::map(&support, |&x| {
        let px = psi[x].norm_sqr();
        let mut m1 = Complex64::new(0.0, 0.0);
        let mut m2 = 0.0;
        for y in 0..d {
            let uyx = u[y * d + x];
            let pyx = uyx.norm_sqr();
            // Round-off transitions would each add |psi(y)|^2 to the second moment.
            if pyx <= eps {
                continue;
            }
            let f = psi[y].conj() / (psi[x].conj() * uyx.conj());
            m1 += px * pyx * f;
            m2 += px * pyx * f.norm_sqr();
        }
        (m1, m2)
    });
    let (mean, second) = per_x
        .iter()
        .fold((Complex64::new(0.0, 0.0), 0.0), |(a, b), (m1, m2)| (a + m1, b + m2));
    let l_a: Complex64 = (0..d)
        .map(|x| psi[x].conj() * (0..d).map(|y| u[x * d + y] * psi[y]).sum::<Complex64>())
        .sum();
    let support_profile = profile(&u, d, eps);
    // Only x drawn from |psi|^2 can reach y, so dim S_y is counted inside supp(psi).
    let predicted: f64 = (0..d)
        .map(|y| {
            let reach = support.iter().filter(|&&x| u[y * d + x].norm_sqr() > eps).count();
            psi[y].norm_sqr() * reach as f64
        })
        .sum::<f64>()
        - l_a.norm_sqr();
    let empirical_var = if n_draws > 0 {
        let cat = Categorical::new(psi.iter().map(|a| a.norm_sqr())).ok_or(Error::ZeroPerturbation { norm2: 0.0 })?;
        let conditionals: Vec<Option<Categorical>> = (0..d)
            .map(|x| {
                (psi[x].norm() >= AMPLITUDE_EPS)
                    .then(|| {
                        Categorical::new((0..d).map(|y| {
                            let p = u[y * d + x].norm_sqr();
                            if p > eps { p } else { 0.0 }
                        }))
                    })
                    .flatten()
            })
            .collect();
        let mut rng = keyed_rng(seed, Domain::Diagnostics, 1, t.to_bits());
        let mut draws = Vec::with_capacity(n_draws);
        for _ in 0..n_draws {
            let x = cat.sample(&mut rng);
            let y = conditionals[x].as_ref().expect("unitary column").sample(&mut rng);
            draws.push(alt_estimator_value(psi[x], psi[y], u[y * d + x]).map_err(|_| Error::VanishingTransition { x, y })?);
        }
        mean_var(&draws)
    } else {
        f64::NAN
    };
    Ok(VarianceReport {
        t,
        n_draws,
        empirical_var,
        predicted_var: predicted,
        exact_var: second - mean.norm_sqr(),
        exact_mean: c2(mean),
        support_profile,
        l_a_exact: c2(l_a),
    })
}
