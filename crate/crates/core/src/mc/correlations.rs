//! Translation-averaged correlation functions on tori, exponential-decay
//! fits and the Gaussianity diagnostic for smeared block spins.

use serde::{Deserialize, Serialize};

use super::stats::{jackknife, Estimate, EstimatorAccumulator, MIN_BINS};
use super::{run_chains, McConfig};
#[cfg(test)]
use super::Algorithm;
use crate::error::{Error, Result};
use crate::exact::critical_beta;
use crate::fit::weighted_linear_fit;
use crate::lattice::{Lattice, Topology};
use crate::model::{BoundaryCondition, Couplings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusCorrelationConfig {
    pub side: usize,
    pub dimension: usize,
    pub beta: f64,
    /// Largest separation measured.
    pub max_distance: usize,
    /// Restrict separations to one axis; all axes are averaged when `None`.
    pub axis: Option<usize>,
    /// Also measure the connected energy–energy function.
    pub energy: bool,
    pub mc: McConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusCorrelations {
    pub distances: Vec<usize>,
    /// `⟨σ_0 σ_r⟩`.
    pub spin: Vec<Estimate>,
    /// `⟨ε_0 ε_r⟩ - ⟨ε⟩²` for bonds `ε = σ_x σ_{x+e}`, averaged over bond
    /// orientations; empty unless requested.
    pub energy: Vec<Estimate>,
}

/// Every cluster holds an even number of the four points.
#[inline]
fn even_pairing(a: u32, b: u32, c: u32, d: u32) -> bool {
    (a == b && c == d) || (a == c && b == d) || (a == d && b == c)
}

/// Measures spin and energy correlations at separations `1..=max_distance`
/// averaged over all translations. Under Swendsen–Wang the cluster
/// estimators `1[x ↔ y]` and `1[every cluster holds an even number of
/// {a, b, c, d}]` replace the spin products.
pub fn torus_correlations(cfg: &TorusCorrelationConfig) -> Result<TorusCorrelations> {
    let d = cfg.dimension;
    let l = cfg.side;
    if cfg.max_distance == 0 || cfg.max_distance >= l {
        return Err(Error::InvalidParameter(format!("max distance must lie in 1..{l}")));
    }
    if let Some(a) = cfg.axis {
        if a >= d {
            return Err(Error::InvalidParameter(format!("no axis {a} in dimension {d}")));
        }
    }
    let lat = Lattice::build(&vec![l; d], Topology::Torus)?;
    let coup = Couplings::uniform(&lat, cfg.beta, 0.0)?;
    let n = lat.num_vertices();
    let axes: Vec<usize> = match cfg.axis {
        Some(a) => vec![a],
        None => (0..d).collect(),
    };
    // shift[a][r][x] = x + r e_a
    let shift: Vec<Vec<Vec<u32>>> = (0..d)
        .map(|a| {
            (0..=cfg.max_distance)
                .map(|r| (0..n).map(|x| lat.shift(x, a, r as isize).unwrap() as u32).collect())
                .collect()
        })
        .collect();
    let rmax = cfg.max_distance;
    let spin_norm = (n * axes.len()) as f64;
    let energy_norm = (n * d * axes.len()) as f64;
    let bond_norm = (n * d) as f64;

    // series: spin[1..=rmax], energy4[1..=rmax], bond
    let width = rmax + if cfg.energy { rmax + 1 } else { 0 };
    let per_chain = run_chains(
        &lat,
        &coup,
        &BoundaryCondition::Free,
        &cfg.mc,
        || vec![Vec::new(); width],
        |acc: &mut Vec<Vec<f64>>, sample| {
            let s = sample.spins;
            let spin_val: Vec<i8> = (0..n).map(|x| s.get(x)).collect();
            for r in 1..=rmax {
                let mut sum = 0u64;
                for &a in &axes {
                    let t = &shift[a][r];
                    sum += match sample.clusters {
                        Some(lab) => (0..n).filter(|&x| lab[x] == lab[t[x] as usize]).count() as u64,
                        None => (0..n).filter(|&x| spin_val[x] == spin_val[t[x] as usize]).count() as u64,
                    };
                }
                // σσ = 2·1[equal] - 1 in the spin case
                let v = sum as f64 / spin_norm;
                acc[r - 1].push(if sample.clusters.is_some() { v } else { 2.0 * v - 1.0 });
            }
            if !cfg.energy {
                return;
            }
            let key: Vec<u32> = match sample.clusters {
                Some(lab) => lab.to_vec(),
                None => spin_val.iter().map(|&v| u32::from(v > 0)).collect(),
            };
            let improved = sample.clusters.is_some();
            let mut bond_sum = 0.0;
            for a in 0..d {
                let step = &shift[a][1];
                for x in 0..n {
                    let y = step[x] as usize;
                    bond_sum += if improved {
                        f64::from(u8::from(key[x] == key[y]))
                    } else if key[x] == key[y] {
                        1.0
                    } else {
                        -1.0
                    };
                }
            }
            for r in 1..=rmax {
                let mut sum = 0.0;
                for a in 0..d {
                    let step = &shift[a][1];
                    for &b in &axes {
                        let t = &shift[b][r];
                        for x in 0..n {
                            let x2 = step[x] as usize;
                            let y = t[x] as usize;
                            let y2 = step[y] as usize;
                            sum += if improved {
                                f64::from(u8::from(even_pairing(key[x], key[x2], key[y], key[y2])))
                            } else {
                                let p = (key[x] ^ key[x2] ^ key[y] ^ key[y2]) & 1;
                                if p == 0 {
                                    1.0
                                } else {
                                    -1.0
                                }
                            };
                        }
                    }
                }
                acc[rmax + r - 1].push(sum / energy_norm);
            }
            acc[2 * rmax].push(bond_sum / bond_norm);
        },
    )?;

    let mut series = vec![EstimatorAccumulator::new(); width];
    for chain in per_chain {
        for (acc, xs) in series.iter_mut().zip(chain) {
            acc.start_chain();
            xs.into_iter().for_each(|x| acc.push(x));
        }
    }
    let spin = series[..rmax].iter().map(EstimatorAccumulator::estimate).collect::<Result<Vec<_>>>()?;
    let energy = if cfg.energy {
        (0..rmax)
            .map(|k| jackknife(&[&series[rmax + k], &series[2 * rmax]], |m| m[0] - m[1] * m[1]))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(TorusCorrelations { distances: (1..=rmax).collect(), spin, energy })
}

/// Log-linear fit `ln G(r) ≈ c - τ r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub rate_stderr: f64,
    pub r_squared: f64,
    /// First and last separation used.
    pub window: (usize, usize),
}

/// Fits the exponential decay of `values` over `distances`, stopping at the
/// first value that is not at least three standard errors above zero.
pub fn fit_exponential_decay(distances: &[usize], values: &[Estimate]) -> Result<DecayFit> {
    let usable = values.iter().take_while(|e| e.mean > 3.0 * e.stderr && e.mean > 0.0).count();
    if usable < 3 {
        return Err(Error::InsufficientSamples(format!(
            "only {usable} separations carry a significant positive correlation"
        )));
    }
    let x: Vec<f64> = distances[..usable].iter().map(|&r| r as f64).collect();
    let y: Vec<f64> = values[..usable].iter().map(|e| e.mean.ln()).collect();
    let w: Vec<f64> = values[..usable]
        .iter()
        .map(|e| if e.stderr > 0.0 { (e.mean / e.stderr).powi(2) } else { 1e12 })
        .collect();
    let fit = weighted_linear_fit(&x, &y, &w)?;
    Ok(DecayFit {
        rate: -fit.slope,
        rate_stderr: fit.slope_stderr,
        r_squared: fit.r_squared,
        window: (distances[0], distances[usable - 1]),
    })
}

/// Exponential decay rate of `⟨σ_0 σ_{r e_axis}⟩` on the 2D `L`-torus at
/// `β < β_c`, separations up to `L/4`.
pub fn correlation_length_fit(beta: f64, side: usize, axis: Option<usize>, mc: &McConfig) -> Result<DecayFit> {
    if beta >= critical_beta() {
        return Err(Error::Precondition("exponential decay needs β < β_c".into()));
    }
    if side < 8 {
        return Err(Error::InvalidParameter("torus side must be at least 8".into()));
    }
    let corr = torus_correlations(&TorusCorrelationConfig {
        side,
        dimension: 2,
        beta,
        max_distance: side / 4,
        axis,
        energy: false,
        mc: *mc,
    })?;
    fit_exponential_decay(&corr.distances, &corr.spin)
}

/// `|⟨exp(zT - z²⟨T²⟩/2)⟩ - 1|` for the smeared block spin
/// `T = Σ_x f(x/L) σ_x / √Σ_L`, `Σ_L` the variance of `Σ_x σ_x`, on the
/// zero-field `L`-torus in dimension `d`. The error bar is a block
/// jackknife over the whole estimator.
pub fn gaussianity_diagnostic(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    side: usize,
    dimension: usize,
    beta: f64,
    z: f64,
    mc: &McConfig,
) -> Result<Estimate> {
    if dimension == 2 && beta > critical_beta() {
        return Err(Error::Precondition("the diagnostic is defined for β ≤ β_c".into()));
    }
    let lat = Lattice::build(&vec![side; dimension], Topology::Torus)?;
    let coup = Couplings::uniform(&lat, beta, 0.0)?;
    let weights: Vec<f64> = (0..lat.num_vertices())
        .map(|v| {
            let x: Vec<f64> = lat.coords(v).iter().map(|&c| c as f64 / side as f64).collect();
            f(&x)
        })
        .collect();
    let per_chain = run_chains(
        &lat,
        &coup,
        &BoundaryCondition::Free,
        mc,
        Vec::new,
        |acc: &mut Vec<(f64, f64)>, sample| {
            let s = sample.spins;
            let u: f64 = weights.iter().enumerate().map(|(x, w)| w * s.get(x) as f64).sum();
            acc.push((u, s.magnetization() as f64));
        },
    )?;
    let samples: Vec<(f64, f64)> = per_chain.into_iter().flatten().collect();
    let nb = 32usize.max(MIN_BINS);
    let block = samples.len() / nb;
    if block == 0 {
        return Err(Error::InsufficientSamples(format!("need at least {nb} samples")));
    }
    let used = &samples[..block * nb];

    let evaluate = |skip: Option<usize>| -> Result<f64> {
        let keep = |i: usize| skip.map_or(true, |b| i / block != b);
        let count = used.iter().enumerate().filter(|(i, _)| keep(*i)).count() as f64;
        let (mut s1, mut s2, mut u2) = (0.0, 0.0, 0.0);
        for (i, &(u, m)) in used.iter().enumerate() {
            if keep(i) {
                s1 += m;
                s2 += m * m;
                u2 += u * u;
            }
        }
        let sigma = s2 / count - (s1 / count).powi(2);
        if !(sigma > 0.0) {
            return Err(Error::InsufficientSamples("block spin variance estimate is not positive".into()));
        }
        let t2 = u2 / count / sigma;
        let scale = z / sigma.sqrt();
        let mean_exp = used
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, &(u, _))| (scale * u).exp())
            .sum::<f64>()
            / count;
        Ok((mean_exp * (-0.5 * z * z * t2).exp() - 1.0).abs())
    };
    let value = evaluate(None)?;
    let leave_out = (0..nb).map(|b| evaluate(Some(b))).collect::<Result<Vec<f64>>>()?;
    let m = leave_out.iter().sum::<f64>() / nb as f64;
    let var = leave_out.iter().map(|x| (x - m).powi(2)).sum::<f64>() * (nb - 1) as f64 / nb as f64;
    Ok(Estimate { mean: value, stderr: var.sqrt(), samples: used.len() })
}

/// Exact diagnostic for independent spins (`β = 0`), where `Σ_L = V`.
pub fn gaussianity_independent(f: &dyn Fn(&[f64]) -> f64, side: usize, dimension: usize, z: f64) -> Result<f64> {
    let lat = Lattice::build(&vec![side; dimension], Topology::Torus)?;
    let v = lat.num_vertices() as f64;
    let a: Vec<f64> = (0..lat.num_vertices())
        .map(|x| {
            let c: Vec<f64> = lat.coords(x).iter().map(|&c| c as f64 / side as f64).collect();
            f(&c) / v.sqrt()
        })
        .collect();
    let log_mgf: f64 = a.iter().map(|ai| (z * ai).cosh().ln()).sum();
    let t2: f64 = a.iter().map(|ai| ai * ai).sum();
    Ok((log_mgf - 0.5 * z * z * t2).exp_m1().abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::transfer::ring_two_point;

    fn default_sw(chains: usize, sweeps: usize, burnin: usize, seed: u64) -> McConfig {
        McConfig::new(Algorithm::SwendsenWang, chains, sweeps, burnin, seed)
    }

    #[test]
    fn ring_decay_rate_matches_transfer_matrix() {
        for beta in [0.1f64, 0.3, 0.6] {
            let len = 200;
            let distances: Vec<usize> = (1..=8).collect();
            let values: Vec<Estimate> = distances
                .iter()
                .map(|&r| Estimate { mean: ring_two_point(beta, len, r), stderr: 1e-15, samples: 1 })
                .collect();
            let fit = fit_exponential_decay(&distances, &values).unwrap();
            assert!((fit.rate + beta.tanh().ln()).abs() < 1e-9, "{beta}");
            assert!(fit.r_squared > 1.0 - 1e-12);
        }
    }

    #[test]
    fn cluster_and_spin_estimators_agree() {
        let base = TorusCorrelationConfig {
            side: 8,
            dimension: 2,
            beta: 0.3,
            max_distance: 3,
            axis: None,
            energy: true,
            mc: default_sw(2, 2200, 200, 9),
        };
        let sw = torus_correlations(&base).unwrap();
        let glauber = torus_correlations(&TorusCorrelationConfig {
            mc: McConfig::new(Algorithm::Glauber, 2, 4200, 200, 9),
            ..base
        })
        .unwrap();
        for (a, b) in sw.spin.iter().zip(&glauber.spin).chain(sw.energy.iter().zip(&glauber.energy)) {
            let z = (a.mean - b.mean).abs() / (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
            assert!(z < 3.5, "{a:?} {b:?}");
        }
    }

    #[test]
    fn even_pairings() {
        assert!(even_pairing(1, 1, 2, 2));
        assert!(even_pairing(1, 2, 1, 2));
        assert!(even_pairing(1, 2, 2, 1));
        assert!(even_pairing(3, 3, 3, 3));
        assert!(!even_pairing(1, 1, 1, 2));
        assert!(!even_pairing(1, 2, 3, 4));
    }

    #[test]
    fn gaussianity_basics() {
        let f = |x: &[f64]| 1.0 + x[0];
        let mc = default_sw(2, 2100, 100, 4);
        let zero = gaussianity_diagnostic(&f, 8, 2, 0.0, 0.0, &mc).unwrap();
        assert_eq!(zero.mean, 0.0);
        let exact = gaussianity_independent(&f, 8, 2, 1.0).unwrap();
        let est = gaussianity_diagnostic(&f, 8, 2, 0.0, 1.0, &mc).unwrap();
        assert!((est.mean - exact).abs() < 3.0 * est.stderr + 1e-3, "{est:?} vs {exact}");
        assert!(gaussianity_diagnostic(&f, 8, 2, 0.5, 1.0, &mc).is_err());
    }
}
