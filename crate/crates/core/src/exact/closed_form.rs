//! Closed forms for the 2D square-lattice model at zero field.

use std::f64::consts::PI;

use super::quadrature::integrate;
use crate::error::{Error, Result};

/// `β_c = ½ ln(1 + √2)`.
pub fn critical_beta() -> f64 {
    0.5 * (1.0 + 2f64.sqrt()).ln()
}

/// Kramers–Wannier dual temperature, `tanh β* = e^{-2β}`.
pub fn kw_dual(beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("dual temperature needs β > 0, got {beta}")));
    }
    Ok((-2.0 * beta).exp().atanh())
}

/// Distance from `β_c` below which the free energy is refused.
pub const CRITICAL_EXCLUSION: f64 = 1e-6;

/// `-βf` on the infinite square lattice with its quadrature error estimate.
///
/// The inner angular integral is done in closed form,
/// `(1/2π)∫ ln(a - s cos θ) dθ = ln((a + √(a² - s²))/2)`, leaving
/// `ln 2 + (1/2π)∫_0^π ln((A + √(A² - s²))/2) dθ` with
/// `A = cosh²2β - s cos θ`, `s = sinh 2β`.
pub fn onsager_free_energy_with_error(beta: f64) -> Result<(f64, f64)> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("β must be finite and nonnegative, got {beta}")));
    }
    if (beta - critical_beta()).abs() < CRITICAL_EXCLUSION {
        return Err(Error::InvalidParameter(format!(
            "β = {beta} is within {CRITICAL_EXCLUSION:e} of β_c; the free energy is not analytic there"
        )));
    }
    let s = (2.0 * beta).sinh();
    let c2 = (2.0 * beta).cosh().powi(2);
    let integrand = |theta: f64| {
        let a = c2 - s * theta.cos();
        // a² - s² = (a - s)(a + s), factored to avoid cancellation
        let disc = ((a - s) * (a + s)).max(0.0);
        ((a + disc.sqrt()) / 2.0).ln()
    };
    let (value, error) = integrate(integrand, 0.0, PI, 1e-11, 4000)?;
    Ok((2f64.ln() + value / (2.0 * PI), error / (2.0 * PI)))
}

/// `-βf` on the infinite square lattice.
pub fn onsager_free_energy(beta: f64) -> Result<f64> {
    Ok(onsager_free_energy_with_error(beta)?.0)
}

/// Spontaneous magnetisation `(1 - sinh(2β)^{-4})^{1/8}` above `β_c`, zero below.
pub fn yang_magnetization(beta: f64) -> f64 {
    if beta <= critical_beta() {
        return 0.0;
    }
    let base = 1.0 - (2.0 * beta).sinh().powi(-4);
    base.max(0.0).powf(0.125)
}

/// Residual of the duality relation
/// `-βf(β) = -β*f(β*) + 2β - ln 2 - 2 ln cosh β*`, both sides by quadrature.
pub fn duality_residual(beta: f64) -> Result<f64> {
    let dual = kw_dual(beta)?;
    let lhs = onsager_free_energy(beta)?;
    let rhs = onsager_free_energy(dual)? + 2.0 * beta - 2f64.ln() - 2.0 * dual.cosh().ln();
    Ok(lhs - rhs)
}

/// Peierls lower bound `1 - 8e^{-2β}/(1 - 4e^{-2β})²` on `⟨σ_0 σ_g⟩` in a
/// box with a ghost vertex; defined for `β > ln 2`.
pub fn peierls_bound(beta: f64) -> Result<f64> {
    if !(beta > 2f64.ln()) {
        return Err(Error::InvalidParameter(format!("Peierls bound needs β > ln 2, got {beta}")));
    }
    if beta.is_infinite() {
        return Ok(1.0);
    }
    let x = (-2.0 * beta).exp();
    Ok(1.0 - 8.0 * x / (1.0 - 4.0 * x).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Periodic trapezoid rule on the original double integral.
    fn double_integral(beta: f64, n: usize) -> f64 {
        let c2 = (2.0 * beta).cosh().powi(2);
        let s = (2.0 * beta).sinh();
        let h = 2.0 * PI / n as f64;
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (t1, t2) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                sum += (c2 - s * (t1.cos() + t2.cos())).ln();
            }
        }
        2f64.ln() + sum * h * h / (8.0 * PI * PI)
    }

    #[test]
    fn matches_double_integral_away_from_criticality() {
        for beta in [0.1, 0.3, 0.7, 1.2] {
            let (v, e) = onsager_free_energy_with_error(beta).unwrap();
            assert!(e <= 1e-8);
            assert!((v - double_integral(beta, 600)).abs() < 1e-9, "{beta}");
        }
    }

    #[test]
    fn limits() {
        assert!((onsager_free_energy(0.0).unwrap() - 2f64.ln()).abs() < 1e-14);
        assert!((onsager_free_energy(1e-6).unwrap() - 2f64.ln()).abs() < 1e-10);
        // low temperature: -βf ≈ 2β
        let b = 5.0;
        assert!((onsager_free_energy(b).unwrap() - 2.0 * b).abs() < 1e-6);
        assert!(onsager_free_energy(critical_beta()).is_err());
        assert!(onsager_free_energy(critical_beta() + 5e-7).is_err());
        assert!(onsager_free_energy(critical_beta() + 1e-5).is_ok());
        assert!(onsager_free_energy(-0.1).is_err());
    }

    #[test]
    fn self_dual_point_and_involution() {
        let bc = critical_beta();
        assert!((bc - 0.440_686_8).abs() < 1e-7);
        assert!((kw_dual(bc).unwrap() - bc).abs() < 1e-14);
        assert!((kw_dual(1.0).unwrap() - (-2f64).exp().atanh()).abs() < 1e-15);
        assert!((kw_dual(1.0).unwrap() - 0.1362).abs() < 1e-4);
        for k in 1..=100 {
            let beta = 0.03 * k as f64;
            let back = kw_dual(kw_dual(beta).unwrap()).unwrap();
            assert!((back - beta).abs() < 1e-12, "{beta}");
        }
        assert!(kw_dual(0.0).is_err());
    }

    #[test]
    fn duality_residuals() {
        for beta in [0.3, 0.7, 0.2, 1.1] {
            let r = duality_residual(beta).unwrap();
            assert!(r.abs() <= 1e-6, "{beta}: {r}");
            let rd = duality_residual(kw_dual(beta).unwrap()).unwrap();
            assert!((r + rd).abs() < 1e-9);
        }
    }

    #[test]
    fn yang_values() {
        assert_eq!(yang_magnetization(0.3), 0.0);
        assert_eq!(yang_magnetization(critical_beta()), 0.0);
        assert!((yang_magnetization(0.6) - 0.9736).abs() < 1e-4);
        assert!(yang_magnetization(critical_beta() + 1e-9) < 0.2);
        assert!((yang_magnetization(20.0) - 1.0).abs() < 1e-15);
        let mut prev = 0.0;
        for k in 0..200 {
            let m = yang_magnetization(0.44 + 0.01 * k as f64);
            assert!((0.0..1.0 + 1e-15).contains(&m) && m >= prev);
            prev = m;
        }
    }

    #[test]
    fn peierls_values() {
        assert!((peierls_bound(1.5).unwrap() - 0.379).abs() < 1e-3);
        assert!((peierls_bound(40.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(peierls_bound(0.5).is_err());
        assert!(peierls_bound(2f64.ln()).is_err());
    }

    #[test]
    fn specific_heat_diverges_logarithmically() {
        // second difference of -βf at distance δ from β_c; doubling the
        // inverse distance adds roughly a constant (log growth)
        let bc = critical_beta();
        let curv = |d: f64| {
            let b = bc - d;
            let h = d / 8.0;
            (onsager_free_energy(b + h).unwrap() - 2.0 * onsager_free_energy(b).unwrap()
                + onsager_free_energy(b - h).unwrap())
                / (h * h)
        };
        let ds = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
        let c: Vec<f64> = ds.iter().map(|&d| curv(d)).collect();
        let increments: Vec<f64> = c.windows(2).map(|w| w[1] - w[0]).collect();
        for inc in &increments {
            assert!(*inc > 0.0);
        }
        // constant increments per halving: a power law would double them
        let ratio = increments[2] / increments[0];
        assert!((0.8..1.25).contains(&ratio), "{increments:?}");
        // slope against ln δ matches the Onsager amplitude: β²∂²(-βf) ≈ -(8β_c²/π) ln|δ|
        let slope = increments[2] / 2f64.ln();
        assert!((slope - 8.0 / PI).abs() < 0.15 * slope, "{slope}");
    }
}
