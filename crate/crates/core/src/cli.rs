//! Batch command-line interface: one job per process, artifacts written
//! atomically with a JSON sidecar report.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use nalgebra::{DVector, Matrix2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::achronal::{is_achronal, resolve_lift, AchronalClass, LimitSetSamples};
use crate::ambient::{causal_sign, conformal_to_ads, AmbientVector, DEFAULT_EPS};
use crate::convex::ConvexCore;
use crate::cosmo::{cosmological_time, gradient_residual, PastHorizon};
use crate::domain::RegularDomain;
use crate::error::{Error, Result};
use crate::euler::{
    basepoint, bounded_cochain, cocycle_detail, conjugate_generators, gamma2_generators, random_isometry,
    semi_conjugacy,
};
use crate::reps::{
    default_fuchsian, default_split, fuchsian_limit_set, perturb, reduced_words, sample_limit_set,
    split_limit_set, GroupRep, RepKind, RepSpec, SampleMode,
};
use crate::sphere::disk_mesh;
use crate::symspace::{divergence_probe, standard_crown, crown_search, Chart, ConvexBody, CrownRecord, DualBody, HullBody};

pub const BANNER: &str = "desk-scale computation: sampled limit sets and meshes stand in for the continuum objects; \
conclusions hold at the stated resolution and tolerances only";

/// Number of random pairs for the cocycle histogram.
const EULER_PAIRS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Classify,
    Achronal,
    Domain,
    Convex,
    Tau,
    Crowns,
    Hyperbolicity,
    Euler,
    Semiconj,
    Rep,
}

#[derive(Clone, Debug, Parser, Serialize)]
#[command(name = "adscausal", version, about = "Causal geometry of anti-de Sitter space at desk scale")]
pub struct JobConfig {
    #[arg(long, value_enum)]
    pub command: Command,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub resolution: usize,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long = "word-length", default_value_t = 6)]
    pub word_length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
}

impl JobConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.resolution < 8 {
            return Err(format!("resolution must be >= 8, got {}", self.resolution));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) || !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err("eps and tol must be positive".into());
        }
        if self.p.is_some() != self.q.is_some() {
            return Err("--p and --q go together".into());
        }
        if self.epsilon.is_some_and(|e| !(e >= 0.0 && e.is_finite())) {
            return Err("epsilon must be finite and >= 0".into());
        }
        if self.n < 2 && self.p.is_none() {
            return Err("n must be >= 2".into());
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok = 0,
    Violation = 1,
    InvalidConfig = 2,
    NumericalFailure = 3,
}

/// Point list exchanged as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointsFile {
    pub points: Vec<Vec<f64>>,
}

/// Pair of circle representations given by 2x2 matrices, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PslPairFile {
    pub rho1: Vec<[f64; 4]>,
    pub rho2: Vec<[f64; 4]>,
}

enum Input {
    None,
    Rep(RepSpec),
    Points(PointsFile),
    Pair(PslPairFile),
}

struct Artifact {
    body: String,
    extension: &'static str,
    report: Value,
    outcome: Outcome,
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn read_input(path: &Option<PathBuf>) -> std::result::Result<Input, String> {
    let Some(path) = path else { return Ok(Input::None) };
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    if let Ok(spec) = serde_json::from_str::<RepSpec>(&text) {
        return Ok(Input::Rep(spec));
    }
    if let Ok(pts) = serde_json::from_str::<PointsFile>(&text) {
        return Ok(Input::Points(pts));
    }
    if let Ok(pair) = serde_json::from_str::<PslPairFile>(&text) {
        return Ok(Input::Pair(pair));
    }
    Err(format!("{}: not a representation spec, point list or matrix pair", path.display()))
}

/// Representation selected by the flags: split when p and q are given,
/// perturbed Fuchsian when epsilon is given, Fuchsian otherwise.
pub fn rep_from_flags(cfg: &JobConfig) -> Result<GroupRep> {
    match (cfg.p, cfg.q, cfg.epsilon) {
        (Some(p), Some(q), _) => default_split(p, q),
        (_, _, Some(e)) => perturb(&default_fuchsian(cfg.n)?, e, cfg.seed),
        _ => default_fuchsian(cfg.n),
    }
}

/// Limit-set samples for a representation: exact samplers for the round
/// sphere and the split join, fixed points of words otherwise.
pub fn limit_set_for(rep: &GroupRep, cfg: &JobConfig) -> Result<LimitSetSamples> {
    match rep.kind {
        RepKind::Fuchsian => fuchsian_limit_set(rep.n, cfg.resolution, cfg.seed),
        RepKind::Split { p, q } => split_limit_set(p, q, cfg.resolution, cfg.seed),
        _ => {
            let mut s = sample_limit_set(rep, cfg.word_length, SampleMode::FixedPoints)?;
            s.lifted = Some(resolve_lift(&s, cfg.eps, 1e-9)?);
            Ok(s)
        }
    }
}

fn samples_from_input(input: &Input, cfg: &JobConfig) -> Result<(LimitSetSamples, Option<GroupRep>)> {
    match input {
        Input::Points(p) => {
            let pts = p
                .points
                .iter()
                .map(|v| AmbientVector::new(v.clone()))
                .collect::<Result<Vec<_>>>()?;
            let mut s = LimitSetSamples::new(pts, cfg.eps.max(DEFAULT_EPS))?;
            if let Ok(g) = resolve_lift(&s, cfg.eps, 1e-9) {
                s.lifted = Some(g);
            }
            Ok((s, None))
        }
        Input::Rep(spec) => {
            let rep = spec.to_rep()?;
            Ok((limit_set_for(&rep, cfg)?, Some(rep)))
        }
        Input::None => {
            let rep = rep_from_flags(cfg)?;
            Ok((limit_set_for(&rep, cfg)?, Some(rep)))
        }
        Input::Pair(_) => Err(Error::InvalidInput("a matrix pair is only accepted by semiconj".into())),
    }
}

fn disk_header(dim: usize) -> String {
    (0..dim).map(|i| format!("w{i}")).collect::<Vec<_>>().join(",")
}

fn disk_cells(w: &DVector<f64>) -> String {
    w.iter().map(|&x| fmt(x)).collect::<Vec<_>>().join(",")
}

fn run_command(cfg: &JobConfig, input: &Input) -> Result<Artifact> {
    match cfg.command {
        Command::Rep => {
            let rep = match input {
                Input::Rep(spec) => spec.to_rep()?,
                _ => rep_from_flags(cfg)?,
            };
            let spec = RepSpec::from_rep(&rep);
            Ok(Artifact {
                body: serde_json::to_string_pretty(&spec).expect("spec serializes"),
                extension: "json",
                report: json!({ "generators": spec.generators.len(), "kind": spec.kind }),
                outcome: Outcome::Ok,
            })
        }
        Command::Classify => {
            let (s, _) = samples_from_input(input, cfg)?;
            let pts = s.points();
            let mut body = String::from("i,j,product,sign\n");
            let mut counts = [0usize; 3];
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    let sign = causal_sign(&pts[i], &pts[j], cfg.eps)?;
                    counts[(sign + 1) as usize] += 1;
                    let _ = writeln!(body, "{i},{j},{},{sign}", fmt(pts[i].inner(&pts[j])));
                }
            }
            Ok(Artifact {
                body,
                extension: "csv",
                report: json!({ "samples": pts.len(), "negative": counts[0], "zero": counts[1], "positive": counts[2] }),
                outcome: Outcome::Ok,
            })
        }
        Command::Achronal => {
            let (s, _) = samples_from_input(input, cfg)?;
            let r = is_achronal(&s, cfg.eps)?;
            let outcome = if r.class == AchronalClass::NotAchronal { Outcome::Violation } else { Outcome::Ok };
            let body = serde_json::to_string_pretty(&json!({
                "class": r.class,
                "witness": r.witness,
                "max_product": r.max_product,
                "samples": s.len(),
            }))
            .expect("report serializes");
            Ok(Artifact {
                body,
                extension: "json",
                report: json!({ "samples": s.len() }),
                outcome,
            })
        }
        Command::Domain => {
            let (s, _) = samples_from_input(input, cfg)?;
            let n = s.dim_n();
            let domain = RegularDomain::new(s)?;
            let mesh = disk_mesh(n, cfg.resolution, cfg.seed);
            let fields = domain.f_fields_mesh(&mesh);
            let mut body = format!("{},f_minus,f_plus\n", disk_header(n + 1));
            for (w, (lo, hi)) in mesh.points.iter().zip(&fields) {
                let _ = writeln!(body, "{},{},{}", disk_cells(w), fmt(*lo), fmt(*hi));
            }
            Ok(Artifact {
                body,
                extension: "csv",
                report: json!({ "limit_samples": domain.sample_count(), "mesh_points": mesh.len(), "spacing": mesh.spacing }),
                outcome: Outcome::Ok,
            })
        }
        Command::Convex => {
            let (s, _) = samples_from_input(input, cfg)?;
            let n = s.dim_n();
            let core = ConvexCore::new(&s, cfg.tol)?;
            let domain = RegularDomain::new(s)?;
            let mesh = disk_mesh(n, cfg.resolution, cfg.seed);
            let mut body = format!("{},f_minus,core_minus,core_plus,f_plus\n", disk_header(n + 1));
            let mut skipped = 0;
            let mut violations = 0;
            let mut worst: f64 = f64::INFINITY;
            for w in mesh.interior() {
                let (lo, hi) = domain.f_fields(w);
                match core.core_boundary(w, cfg.tol) {
                    Ok((a, b)) => {
                        let margin = (a - lo).min(b - a).min(hi - b);
                        worst = worst.min(margin);
                        if margin < -cfg.tol.sqrt() {
                            violations += 1;
                        }
                        let _ = writeln!(body, "{},{},{},{},{}", disk_cells(w), fmt(lo), fmt(a), fmt(b), fmt(hi));
                    }
                    Err(Error::DegenerateCore(_)) => skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok(Artifact {
                body,
                extension: "csv",
                report: json!({
                    "limit_samples": domain.sample_count(),
                    "mesh_points": mesh.len(),
                    "skipped_fibers": skipped,
                    "sandwich_violations": violations,
                    "worst_sandwich_margin": worst,
                }),
                outcome: if violations > 0 { Outcome::Violation } else { Outcome::Ok },
            })
        }
        Command::Tau => {
            let (s, _) = samples_from_input(input, cfg)?;
            let n = s.dim_n();
            let domain = RegularDomain::new(s)?;
            let horizon = PastHorizon::new(&domain, &disk_mesh(n, cfg.resolution, cfg.seed), cfg.eps)?;
            let probe = disk_mesh(n, (cfg.resolution / 4).max(8), cfg.seed);
            let mut body = format!("{},theta,tau\n", disk_header(n + 1));
            let mut accepted = 0;
            let mut rejected = 0;
            let mut gradient = vec![0.0f64; 3];
            let steps = [1e-2, 1e-3, 1e-4];
            let dir = {
                let mut d = vec![0.0; n + 2];
                d[2] = 1.0;
                AmbientVector::new(d)?
            };
            for w in probe.interior() {
                let (lo, hi) = domain.f_fields(w);
                let theta = lo + 0.25 * (hi - lo).min(PI);
                let x = conformal_to_ads(theta, w)?;
                match cosmological_time(&domain, &x, &horizon, 40, cfg.eps) {
                    Ok(cp) => {
                        accepted += 1;
                        let _ = writeln!(body, "{},{},{}", disk_cells(w), fmt(theta), fmt(cp.tau));
                        if accepted <= 8 {
                            for (g, &h) in gradient.iter_mut().zip(&steps) {
                                if let Ok(r) = gradient_residual(&domain, &cp, &dir, &horizon, h, 40) {
                                    *g = g.max(r);
                                }
                            }
                        }
                    }
                    Err(Error::OutsideTightRegion { .. } | Error::NoPastHorizonVisible | Error::NonUniqueRetract { .. }) => {
                        rejected += 1
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(Artifact {
                body,
                extension: "csv",
                report: json!({
                    "limit_samples": domain.sample_count(),
                    "horizon_samples": horizon.len(),
                    "accepted_points": accepted,
                    "rejected_points": rejected,
                    "gradient_residual": steps.iter().zip(&gradient).map(|(h, r)| json!({"step": h, "residual": r})).collect::<Vec<_>>(),
                }),
                outcome: Outcome::Ok,
            })
        }
        Command::Crowns => {
            let (s, _) = samples_from_input(input, cfg)?;
            let crowns = crown_search(&s, cfg.tol);
            let records: Vec<CrownRecord> = crowns.iter().map(CrownRecord::from).collect();
            Ok(Artifact {
                body: serde_json::to_string_pretty(&json!({ "crowns": records })).expect("crowns serialize"),
                extension: "json",
                report: json!({ "samples": s.len(), "crowns": records.len() }),
                outcome: Outcome::Ok,
            })
        }
        Command::Hyperbolicity => {
            let (s, rep) = samples_from_input(input, cfg)?;
            let ts: Vec<f64> = (1..=8).map(|t| t as f64).collect();
            let split = matches!(rep.as_ref().map(|r| r.kind), Some(RepKind::Split { .. }));
            let profile = if split {
                hyperbolicity_split(s.dim_n(), cfg.tol, &ts)?
            } else {
                hyperbolicity_fuchsian(cfg.resolution, &ts)?
            };
            let mut body = String::from("t,divergence\n");
            for (t, d) in &profile {
                let _ = writeln!(body, "{},{}", fmt(*t), fmt(*d));
            }
            Ok(Artifact {
                body,
                extension: "csv",
                report: json!({ "samples": s.len(), "body": if split { "crown hull" } else { "invisible domain slice" } }),
                outcome: Outcome::Ok,
            })
        }
        Command::Euler => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let x0 = basepoint(cfg.n);
            let mut hist = [0usize; 3];
            let mut worst: f64 = 0.0;
            for _ in 0..EULER_PAIRS {
                let g1 = random_isometry(cfg.n, 2.0, &mut rng);
                let g2 = random_isometry(cfg.n, 2.0, &mut rng);
                let c = cocycle_detail(&g1, &g2, &x0)?;
                hist[(c.value + 1) as usize] += 1;
                worst = worst.max(c.residual);
            }
            let cochain = match input {
                Input::Rep(spec) => {
                    let rep = spec.to_rep()?;
                    let s = limit_set_for(&rep, cfg)?;
                    let graph = s
                        .lifted
                        .clone()
                        .ok_or_else(|| Error::InvalidInput("limit set has no lift".into()))?;
                    let words = reduced_words(rep.generators.len(), cfg.word_length.min(4));
                    Some(bounded_cochain(&rep, &graph, &words, cfg.tol.max(1e-6))?)
                }
                _ => None,
            };
            let body = serde_json::to_string_pretty(&json!({
                "pairs": EULER_PAIRS,
                "histogram": { "-1": hist[0], "0": hist[1], "1": hist[2] },
                "max_residual": worst,
                "cochain": cochain,
            }))
            .expect("report serializes");
            Ok(Artifact {
                body,
                extension: "json",
                report: json!({ "pairs": EULER_PAIRS }),
                outcome: Outcome::Ok,
            })
        }
        Command::Semiconj => {
            let (rho1, rho2) = match input {
                Input::Pair(p) => {
                    let m = |v: &[f64; 4]| Matrix2::new(v[0], v[1], v[2], v[3]);
                    (p.rho1.iter().map(m).collect(), p.rho2.iter().map(m).collect())
                }
                Input::None => {
                    let g = gamma2_generators();
                    let h = Matrix2::new(1.3, 0.4, 0.2, (1.0 + 0.4 * 0.2) / 1.3);
                    let g2 = conjugate_generators(&g, &h);
                    (g, g2)
                }
                _ => return Err(Error::InvalidInput("semiconj takes a matrix pair file".into())),
            };
            let sc = semi_conjugacy(&rho1, &rho2, cfg.resolution, cfg.word_length.min(5))?;
            let mut body = String::from("phi,f\n");
            for (a, f) in sc.mesh.iter().zip(&sc.values) {
                let _ = writeln!(body, "{},{}", fmt(*a), fmt(*f));
            }
            Ok(Artifact {
                body,
                extension: "csv",
                report: json!({
                    "mesh_points": sc.mesh.len(),
                    "residual": sc.residual,
                    "coarse_residual": sc.coarse_residual,
                    "inversions": sc.inversions,
                    "worst_inversion": sc.worst_inversion,
                    "degree": sc.degree,
                    "shifts": sc.shifts,
                }),
                outcome: if sc.inversions > 0 { Outcome::Violation } else { Outcome::Ok },
            })
        }
    }
}

/// Divergence profile in the Hilbert geometry of the convex hull of the
/// standard crown, along two of its edges.
pub fn hyperbolicity_split(n: usize, tol: f64, ts: &[f64]) -> Result<Vec<(f64, f64)>> {
    let c = standard_crown(n.max(2));
    let s = LimitSetSamples::new(c.vertices().iter().map(|v| (*v).clone()).collect(), 1e-9)?;
    let core = ConvexCore::new(&s, tol)?;
    let body = HullBody { core: &core, tol };
    let z = core.interior_seed().clone();
    let chart = Chart::new(&z);
    divergence_probe(&body as &dyn ConvexBody, &chart, &c.x_minus, &c.x_plus, &z, ts)
}

/// Divergence profile in the invisible domain of the round circle, inside
/// the slice v = 0 (a Klein disk).
pub fn hyperbolicity_fuchsian(resolution: usize, ts: &[f64]) -> Result<Vec<(f64, f64)>> {
    let m = 8 * resolution;
    let gens: Vec<AmbientVector> = (0..m)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / m as f64;
            AmbientVector::new(vec![1.0, 0.0, a.cos(), a.sin()]).and_then(|v| v.normalized())
        })
        .collect::<Result<_>>()?;
    let body = DualBody { generators: &gens };
    let z = AmbientVector::new(vec![1.0, 0.0, 0.0, 0.0])?;
    let x = AmbientVector::new(vec![1.0, 0.0, 1.0, 0.0])?;
    let y = AmbientVector::new(vec![1.0, 0.0, 0.0, 1.0])?;
    divergence_probe(&body as &dyn ConvexBody, &Chart::new(&z), &x, &y, &z, ts)
}

fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".report.json");
    PathBuf::from(s)
}

fn configure_threads() {
    if let Some(n) = std::env::var("ADSCAUSAL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Runs one job and returns the exit status.
pub fn run(cfg: &JobConfig) -> Outcome {
    if let Err(msg) = cfg.validate() {
        eprintln!("invalid configuration: {msg}");
        return Outcome::InvalidConfig;
    }
    let input = match read_input(&cfg.input) {
        Ok(i) => i,
        Err(msg) => {
            eprintln!("invalid configuration: {msg}");
            return Outcome::InvalidConfig;
        }
    };
    configure_threads();
    let artifact = match run_command(cfg, &input) {
        Ok(a) => a,
        Err(e @ (Error::InvalidInput(_) | Error::BadSignature(_))) => {
            eprintln!("invalid configuration: {}: {e}", e.name());
            return Outcome::InvalidConfig;
        }
        Err(e) => {
            eprintln!("numerical failure: {}: {e}", e.name());
            return Outcome::NumericalFailure;
        }
    };
    let report = json!({
        "command": cfg.command,
        "config_hash": cfg.hash(),
        "config": cfg,
        "banner": BANNER,
        "sample_counts": artifact.report,
        "exit_code": artifact.outcome as i32,
    });
    match &cfg.output {
        Some(path) => {
            let rep = serde_json::to_string_pretty(&report).expect("report serializes");
            if let Err(e) = write_atomic(path, &artifact.body).and_then(|_| write_atomic(&sidecar_path(path), &rep)) {
                eprintln!("cannot write {}: {e}", path.display());
                return Outcome::InvalidConfig;
            }
        }
        None => {
            print!("{}", artifact.body);
            if !artifact.body.ends_with('\n') {
                println!();
            }
            eprintln!("{}", serde_json::to_string(&report).expect("report serializes"));
        }
    }
    let _ = artifact.extension;
    artifact.outcome
}
