//! Dispatch of a resolved configuration to the library.

use std::fmt;
use std::time::Instant;

use ising_lab::currents::{diffineq_check, switching_check, ursell4, CurrentModel, DiffIneqKind, TotalCurrent};
use ising_lab::exact::{log_partition, log_partition_all, onsager_free_energy_with_error, yang_magnetization, Enumerator, Method};
use ising_lab::fermionic::{
    cut_deformation_check, order_disorder_correlator, order_disorder_negated, preholomorphic_check,
    ComplexLatticeFunction, Cut, Domain, Insertion,
};
use ising_lab::fk::{crossing_probability, es_coupling_check, fk_densities, FkParams};
use ising_lab::inequalities::{run_battery, BatterySummary, InequalityKind};
use ising_lab::lattice::parse_edge_list;
use ising_lab::mc::{run_estimate, Algorithm, Estimate, McConfig, Observable};
use ising_lab::scaling::{
    boundary_pfaffian, exponent_experiment, scaling_relations_check, ExponentSet, PowerLawFit, ScalingKind,
    ScalingParams,
};
use ising_lab::{BoundaryCondition, Couplings, Lattice, Topology};
use num_complex::Complex64;
use serde::Deserialize;

use crate::config::{ConfigError, ExperimentConfig};
use crate::output::{emit_results, write_output, ResultRecord};

/// Failure of a run, split by exit code.
#[derive(Debug)]
pub enum RunError {
    /// Bad input (exit code 1).
    Invalid(String),
    /// Numerical failure (exit code 2).
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid(_) => 1,
            RunError::Numerical(_) => 2,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Invalid(m) | RunError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Invalid(e.0)
    }
}

impl From<ising_lab::Error> for RunError {
    fn from(e: ising_lab::Error) -> Self {
        if e.is_numerical() {
            RunError::Numerical(e.to_string())
        } else {
            RunError::Invalid(e.to_string())
        }
    }
}

type Result<T> = std::result::Result<T, RunError>;

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(RunError::Invalid(msg.into()))
}

/// Builds records for one experiment, sharing its parameter echo.
struct Records<'a> {
    cfg: &'a ExperimentConfig,
    params: String,
    rows: Vec<ResultRecord>,
}

impl<'a> Records<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        Records { cfg, params: cfg.param_echo(), rows: Vec::new() }
    }

    /// Uses `key=value` in place of the configured value for later rows.
    fn with_param(&mut self, key: &str, value: impl fmt::Display) {
        let mut parts: Vec<String> = self.cfg.param_echo().split(';').map(String::from).collect();
        let prefix = format!("{key}=");
        for p in parts.iter_mut().filter(|p| p.starts_with(&prefix)) {
            *p = format!("{key}={value}");
        }
        self.params = parts.join(";");
    }

    fn exact(&mut self, observable: impl Into<String>, value: f64, provenance: &str) {
        self.push(observable, value, None, provenance);
    }

    fn estimate(&mut self, observable: impl Into<String>, e: &Estimate, provenance: &str) {
        let provenance = format!("{provenance};samples={}", e.samples);
        self.push(observable, e.mean, Some(e.stderr), &provenance);
    }

    fn push(&mut self, observable: impl Into<String>, value: f64, stderr: Option<f64>, provenance: &str) {
        self.rows.push(ResultRecord {
            experiment: self.cfg.subcommand.clone(),
            params: self.params.clone(),
            observable: observable.into(),
            value,
            stderr,
            provenance: provenance.to_string(),
            seconds: None,
        });
    }
}

/// Runs the experiment and writes its results.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<()> {
    let start = Instant::now();
    let format = cfg.str("format")?;
    let output = cfg.str("output")?;
    if cfg.subcommand == "check" && format == "json" {
        let summaries = check_summaries(cfg)?;
        let mut text = if summaries.len() == 1 {
            serde_json::to_string_pretty(&summaries[0])
        } else {
            serde_json::to_string_pretty(&summaries)
        }
        .map_err(|e| RunError::Invalid(e.to_string()))?;
        text.push('\n');
        return Ok(write_output(&text, output)?);
    }
    let mut records = match cfg.subcommand.as_str() {
        "exact" => run_exact(cfg)?,
        "mc" => run_mc(cfg)?,
        "fk" => run_fk(cfg)?,
        "currents" => run_currents(cfg)?,
        "check" => run_check(cfg)?,
        "scaling" => run_scaling(cfg)?,
        "holo" => run_holo(cfg)?,
        other => return invalid(format!("unknown subcommand `{other}`")),
    };
    if cfg.str("timing")? == "on" {
        let seconds = start.elapsed().as_secs_f64();
        records.iter_mut().for_each(|r| r.seconds = Some(seconds));
    }
    Ok(emit_results(&records, format, output)?)
}

fn parse_sides(spec: &str) -> Result<Vec<usize>> {
    let sides: Option<Vec<usize>> = spec.split('x').map(|s| s.trim().parse().ok()).collect();
    match sides {
        Some(s) if !s.is_empty() && s.iter().all(|&n| n > 0) => Ok(s),
        _ => invalid(format!("lattice `{spec}` is neither NxM... nor file:<path>")),
    }
}

fn read_graph(path: &str) -> Result<(Lattice, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Invalid(format!("cannot read {path}: {e}")))?;
    Ok(parse_edge_list(&text)?)
}

fn boundary(name: &str, lat: &Lattice) -> BoundaryCondition {
    match name {
        "plus" => BoundaryCondition::Plus,
        "minus" => BoundaryCondition::Minus,
        "dobrushin" => {
            let axis = lat.dimension().saturating_sub(1);
            let level = lat.sides().get(axis).map_or(0, |&n| n as i64 / 2);
            BoundaryCondition::Dobrushin { axis, level, plus_above: true }
        }
        _ => BoundaryCondition::Free,
    }
}

/// Lattice, per-edge couplings and bc from a shape or an edge-list file.
fn build_lattice(sides: Option<Vec<usize>>, graph: Option<&str>, bc: &str) -> Result<(Lattice, Vec<f64>, BoundaryCondition)> {
    if let Some(path) = graph {
        let (lat, coupling) = read_graph(path)?;
        if bc != "free" {
            return invalid("edge-list graphs take free boundary conditions only");
        }
        return Ok((lat, coupling, BoundaryCondition::Free));
    }
    let sides = sides.expect("either sides or a graph");
    let topology = if bc == "periodic" { Topology::Torus } else { Topology::FreeBox };
    let lat = Lattice::build(&sides, topology)?;
    let coupling = vec![1.0; lat.num_edges()];
    let bc = boundary(bc, &lat);
    Ok((lat, coupling, bc))
}

fn lattice_key(cfg: &ExperimentConfig) -> Result<(Lattice, Vec<f64>, BoundaryCondition)> {
    let spec = cfg.str("lattice")?;
    match spec.strip_prefix("file:") {
        Some(path) => build_lattice(None, Some(path), cfg.str("bc")?),
        None => build_lattice(Some(parse_sides(spec)?), None, cfg.str("bc")?),
    }
}

fn couplings(lat: &Lattice, coupling: &[f64], beta: f64, h: f64) -> Result<Couplings> {
    Ok(Couplings::new(beta, vec![h; lat.num_vertices()], coupling.to_vec())?)
}

fn run_exact(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let (lat, coupling, bc) = lattice_key(cfg)?;
    let h = cfg.f64("h")?;
    let method = cfg.str("method")?;
    let observables = cfg.words("observable")?;
    let mut out = Records::new(cfg);
    for beta in cfg.f64_list("beta")? {
        out.with_param("beta", beta);
        let coup = couplings(&lat, &coupling, beta, h)?;
        let partitions = || -> Result<_> {
            Ok(match method {
                "all" => log_partition_all(&lat, &coup, &bc),
                m => vec![log_partition(&lat, &coup, &bc, m.parse::<Method>()?)?],
            })
        };
        for &obs in &observables {
            match obs {
                "log-partition" => {
                    for lz in partitions()? {
                        out.exact(obs, lz.value, &format!("exact:{}", lz.method));
                    }
                }
                "free-energy" => {
                    if beta == 0.0 {
                        return invalid("the free energy per site needs beta > 0");
                    }
                    let v = lat.num_vertices() as f64;
                    for lz in partitions()? {
                        out.exact(obs, -lz.value / (beta * v), &format!("exact:{}", lz.method));
                    }
                }
                "energy" | "magnetization" => {
                    let en = Enumerator::new(&lat, &coup, &bc)?;
                    let n = lat.num_vertices();
                    let value = if obs == "energy" {
                        let m = lat.num_edges().max(1) as f64;
                        en.expectations(&[&|mask| en.energy(mask) / m]).1[0]
                    } else {
                        en.expectations(&[&|mask: u64| (2.0 * f64::from(mask.count_ones()) - n as f64) / n as f64]).1[0]
                    };
                    out.exact(obs, value, "exact:enumerate");
                }
                "onsager" => {
                    let (value, error) = onsager_free_energy_with_error(beta)?;
                    out.exact(obs, value, "closed-form:onsager");
                    out.exact("onsager.error_bound", error, "closed-form:onsager");
                }
                "yang" => out.exact(obs, yang_magnetization(beta), "closed-form:yang"),
                other => return invalid(format!("unknown observable `{other}`")),
            }
        }
    }
    Ok(out.rows)
}

fn mc_config(cfg: &ExperimentConfig, algorithm: Algorithm) -> Result<McConfig> {
    let mc = McConfig::new(algorithm, cfg.usize("chains")?, cfg.usize("sweeps")?, cfg.usize("burnin")?, cfg.u64("seed")?);
    mc.validate()?;
    Ok(mc)
}

fn graph_key(cfg: &ExperimentConfig) -> Result<Option<&str>> {
    Ok(Some(cfg.str("graph")?).filter(|g| !g.is_empty()))
}

fn run_mc(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let algorithm = match cfg.str("algo")? {
        "glauber" => Algorithm::Glauber,
        _ => Algorithm::SwendsenWang,
    };
    let side = cfg.usize("L")?;
    let graph = graph_key(cfg)?;
    let (lat, coupling, bc) = build_lattice(Some(vec![side; cfg.usize("d")?]), graph, cfg.str("bc")?)?;
    let coup = couplings(&lat, &coupling, cfg.f64("beta")?, cfg.f64("h")?)?;
    let mc = mc_config(cfg, algorithm)?;
    let provenance = format!("mc:{}", cfg.str("algo")?);
    let mut out = Records::new(cfg);
    for obs in cfg.words("observable")? {
        let observable = match obs {
            "magnetization" => Observable::Magnetization,
            "abs-magnetization" => Observable::AbsMagnetization,
            "energy" => Observable::Energy,
            "specific-heat" => Observable::SpecificHeat,
            "susceptibility" => Observable::Susceptibility,
            "two-point" => {
                if graph.is_some() {
                    return invalid("two-point runs along the first axis of a generated lattice");
                }
                let mut coords = vec![0; lat.dimension()];
                let targets = (1..=side / 2)
                    .map(|r| {
                        coords[0] = r;
                        lat.index(&coords)
                    })
                    .collect();
                Observable::TwoPoint { origin: 0, targets }
            }
            other => return invalid(format!("unknown observable `{other}`")),
        };
        let estimates = run_estimate(&observable, &lat, &coup, &bc, &mc)?;
        if let Observable::TwoPoint { .. } = observable {
            for (r, e) in estimates.iter().enumerate() {
                out.estimate(format!("two-point@{}", r + 1), e, &provenance);
            }
        } else {
            out.estimate(obs, &estimates[0], &provenance);
        }
    }
    Ok(out.rows)
}

fn run_fk(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let params = FkParams::new(cfg.f64("p")?, cfg.f64("q")?)?;
    let side = cfg.usize("L")?;
    let mut out = Records::new(cfg);
    match cfg.str("mode")? {
        "sample" => {
            let (lat, coupling, _) = build_lattice(Some(vec![side, side]), graph_key(cfg)?, "free")?;
            if coupling.iter().any(|&j| j != 1.0) {
                return invalid("FK sampling takes unit couplings");
            }
            let (density, clusters) = fk_densities(&lat, &params, &mc_config(cfg, Algorithm::SwendsenWang)?)?;
            out.estimate("edge-density", &density, "mc:fk");
            out.estimate("clusters-per-vertex", &clusters, "mc:fk");
        }
        "crossing" => {
            if params.q != 2.0 {
                return invalid("crossings are sampled at q = 2");
            }
            let mc = mc_config(cfg, Algorithm::SwendsenWang)?;
            let p = crossing_probability(side, cfg.f64("rho")?, params.p, &mc)?;
            out.estimate("crossing", &p, "mc:fk");
        }
        _ => {
            if params.q != 2.0 {
                return invalid("the Edwards–Sokal check runs at q = 2");
            }
            let lat = Lattice::build(&[side, side], Topology::FreeBox)?;
            let dev = es_coupling_check(&lat, params.ising_beta())?;
            out.exact("es-deviation", dev, "exact:enumerate");
        }
    }
    Ok(out.rows)
}

fn vertex_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .map(|w| w.parse().map_err(|_| RunError::Invalid(format!("`{w}` is not a vertex"))))
        .collect()
}

fn run_currents(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let (lat, coupling, _) = lattice_key(cfg)?;
    let beta = cfg.f64("beta")?;
    let nmax = u32::try_from(cfg.usize("nmax")?).map_err(|_| RunError::Invalid("nmax is too large".into()))?;
    let sources = cfg.str("sources")?;
    let mut out = Records::new(cfg);
    let tail = "exact:currents";
    match cfg.str("mode")? {
        "correlation" => {
            let model = CurrentModel::new(&lat, &couplings(&lat, &coupling, beta, 0.0)?)?;
            let t = model.correlation(&vertex_list(sources)?, nmax)?;
            out.exact("correlation", t.value, tail);
            out.exact("correlation.tail_bound", t.tail_bound, tail);
        }
        "switching" => {
            let model = CurrentModel::new(&lat, &couplings(&lat, &coupling, beta, 0.0)?)?;
            let (a, b) = sources.split_once(';').unwrap_or((sources, ""));
            let s = switching_check(&model, &vertex_list(a)?, &vertex_list(b)?, TotalCurrent::Any, nmax)?;
            out.exact("switching.lhs", s.lhs, tail);
            out.exact("switching.rhs", s.rhs, tail);
            out.exact("switching.residual", s.residual, tail);
            out.exact("switching.tail_bound", s.bound, tail);
        }
        "ursell" => {
            let model = CurrentModel::new(&lat, &couplings(&lat, &coupling, beta, 0.0)?)?;
            let x: [usize; 4] = vertex_list(sources)?
                .try_into()
                .map_err(|_| RunError::Invalid("ursell needs exactly four sources".into()))?;
            let u = ursell4(&model, x, nmax)?;
            out.exact("ursell4", u.value, "exact:enumerate");
            out.exact("ursell4.current_form", u.current_form, tail);
            out.exact("ursell4.residual", u.residual, tail);
            out.exact("ursell4.tail_bound", u.bound, tail);
        }
        _ => {
            let kind = match cfg.str("inequality")? {
                "magnetization" => DiffIneqKind::Magnetization,
                _ => DiffIneqKind::ChiBubble,
            };
            let r = diffineq_check(kind, &lat, beta, cfg.f64("h")?)?;
            let prov = "exact:enumerate;finite-differences";
            out.exact("diffineq.lower", r.lower, prov);
            out.exact("diffineq.middle", r.middle, prov);
            out.exact("diffineq.upper", r.upper, prov);
            out.exact("diffineq.fd_error", r.fd_error, prov);
            out.exact("diffineq.violation", r.violation, prov);
        }
    }
    Ok(out.rows)
}

fn check_summaries(cfg: &ExperimentConfig) -> Result<Vec<BatterySummary>> {
    let words = cfg.words("kind")?;
    let kinds: Vec<InequalityKind> = if words.contains(&"all") {
        InequalityKind::ALL.to_vec()
    } else {
        words.iter().map(|w| w.parse()).collect::<std::result::Result<_, _>>()?
    };
    let (trials, seed, cap) = (cfg.usize("trials")?, cfg.u64("seed")?, cfg.usize("size-cap")?);
    kinds.into_iter().map(|k| Ok(run_battery(k, trials, seed, cap)?)).collect()
}

fn run_check(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let mut out = Records::new(cfg);
    for s in check_summaries(cfg)? {
        let prov = format!("battery:{}", s.kind);
        out.exact(format!("{}.violations", s.kind), s.violations as f64, &prov);
        out.exact(format!("{}.worst_margin", s.kind), s.worst_margin, &prov);
    }
    Ok(out.rows)
}

fn push_fit(out: &mut Records, fit: &PowerLawFit, provenance: &str) {
    out.push("exponent", fit.exponent, Some(fit.stderr), provenance);
    out.exact("r2", fit.r_squared, provenance);
    out.exact("window_lo", fit.window.0, provenance);
    out.exact("window_hi", fit.window.1, provenance);
    out.exact("points", fit.points as f64, provenance);
}

fn run_scaling(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let side = cfg.usize("L")?;
    let mut out = Records::new(cfg);
    let window = match cfg.str("window")? {
        "" => None,
        w => {
            let parsed = w.split_once(':').and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
            match parsed {
                Some(pair) => Some(pair),
                None => return invalid(format!("window `{w}` is not lo:hi")),
            }
        }
    };
    match cfg.str("kind")? {
        "relations" => {
            for (label, set) in [("mean-field-4d", ExponentSet::mean_field(4)), ("ising-2d", ExponentSet::ising_2d())] {
                let r = scaling_relations_check(&set)?;
                out.exact(format!("{label}.residual"), r.residual, "exact:relations");
            }
        }
        "boundary-pfaffian" => {
            let mut seps = cfg.usize_list("separations")?;
            if seps.is_empty() {
                seps = vec![(side / 8).max(1), (side / 4).max(1)];
            }
            let mc = mc_config(cfg, Algorithm::SwendsenWang)?;
            for p in boundary_pfaffian(side, &seps, &mc)? {
                let s = p.separation;
                out.estimate(format!("four-point@{s}"), &p.four_point, "mc:sw");
                out.estimate(format!("pfaffian@{s}"), &p.pfaffian, "mc:sw");
                out.estimate(format!("deviation@{s}"), &p.signed_deviation, "mc:sw");
            }
        }
        kind => {
            let kind: ScalingKind = kind.parse()?;
            let params = ScalingParams { side, mc: mc_config(cfg, Algorithm::SwendsenWang)?, window, beta: None };
            let fit = exponent_experiment(kind, &params)?;
            let prov = if kind == ScalingKind::BetaMagnetization { "fit:closed-form" } else { "fit:mc:sw" };
            push_fit(&mut out, &fit, prov);
        }
    }
    Ok(out.rows)
}

/// Cut specification in a holo input file.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CutSpec {
    Named(String),
    Edges { edges: Vec<usize> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InsertionSpec {
    vertex: Option<usize>,
    /// `[x, y]` of the face's lower-left corner; absent for the unbounded face.
    face: Option<[usize; 2]>,
    cut: Option<CutSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HoloInput {
    width: usize,
    height: usize,
    /// `one`, `z`, `z2`, `z3` or `conj`.
    function: Option<String>,
    /// `[re, im]` per vertex, row-major.
    values: Option<Vec<[f64; 2]>>,
    beta: Option<f64>,
    #[serde(default)]
    insertions: Vec<InsertionSpec>,
    /// Alternative cuts, one per insertion, for a deformation measurement.
    alternate_cuts: Option<Vec<Option<CutSpec>>>,
}

fn resolve_cut(domain: &Domain, face: usize, spec: Option<&CutSpec>) -> Result<Cut> {
    if face == domain.outer_face() {
        return Ok(Cut { edges: Vec::new(), target: face });
    }
    Ok(match spec {
        None => Cut::from_below(domain, face)?,
        Some(CutSpec::Named(n)) if n == "below" => Cut::from_below(domain, face)?,
        Some(CutSpec::Named(n)) if n == "left" => Cut::from_left(domain, face)?,
        Some(CutSpec::Named(n)) => return invalid(format!("unknown cut `{n}`; use below, left or {{\"edges\": [...]}}")),
        Some(CutSpec::Edges { edges }) => Cut { edges: edges.clone(), target: face },
    })
}

fn run_holo(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let path = cfg.str("input")?;
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Invalid(format!("cannot read {path}: {e}")))?;
    let input: HoloInput =
        serde_json::from_str(&text).map_err(|e| RunError::Invalid(format!("malformed holo input: {e}")))?;
    let domain = Domain::new(input.width, input.height)?;
    let mut out = Records::new(cfg);
    match cfg.str("mode")? {
        "residual" => {
            let f = match (&input.function, &input.values) {
                (Some(name), None) => {
                    let g: fn(Complex64) -> Complex64 = match name.as_str() {
                        "one" => |_| Complex64::new(1.0, 0.0),
                        "z" => |z| z,
                        "z2" => |z| z * z,
                        "z3" => |z| z * z * z,
                        "conj" => |z| z.conj(),
                        other => return invalid(format!("unknown function `{other}`")),
                    };
                    ComplexLatticeFunction::from_fn(domain, g)
                }
                (None, Some(values)) => {
                    ComplexLatticeFunction::new(domain, values.iter().map(|&[re, im]| Complex64::new(re, im)).collect())?
                }
                _ => return invalid("give exactly one of `function` and `values`"),
            };
            out.exact("max-residual", preholomorphic_check(&f), "exact:isaacs");
        }
        _ => {
            let Some(beta) = input.beta else {
                return invalid("orderdisorder needs `beta`");
            };
            if !(beta >= 0.0 && beta.is_finite()) {
                return invalid(format!("beta must be >= 0, got {beta}"));
            }
            let mut pairs = Vec::new();
            let mut cuts = Vec::new();
            for spec in &input.insertions {
                let face = match spec.face {
                    Some([x, y]) => domain.face(x, y)?,
                    None => domain.outer_face(),
                };
                pairs.push(Insertion { vertex: spec.vertex, face });
                cuts.push(resolve_cut(&domain, face, spec.cut.as_ref())?);
            }
            let a = order_disorder_correlator(&domain, beta, &pairs, &cuts)?;
            let b = order_disorder_negated(&domain, beta, &pairs, &cuts)?;
            out.exact("correlator", a, "exact:enumerate;insertion");
            out.exact("correlator.negated", b, "exact:enumerate;negated-couplings");
            out.exact("route-difference", (a - b).abs(), "exact:enumerate");
            if let Some(alt) = &input.alternate_cuts {
                if alt.len() != pairs.len() {
                    return invalid("alternate_cuts needs one entry per insertion");
                }
                let other = pairs
                    .iter()
                    .zip(alt)
                    .map(|(p, c)| resolve_cut(&domain, p.face, c.as_ref()))
                    .collect::<Result<Vec<_>>>()?;
                let dev = cut_deformation_check(&domain, beta, &pairs, &cuts, &other)?;
                out.exact("deformation", dev, "exact:enumerate");
            }
        }
    }
    Ok(out.rows)
}
