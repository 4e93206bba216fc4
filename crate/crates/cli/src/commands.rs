//! Subcommand drivers. Each one resolves the configuration, computes, writes
//! its artifacts into a fresh run directory and reports pass or fail.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use serde::Serialize;

use pmlab_core::assembly::{eps_sweep, glue, q4_trace, run_suite, SuiteConfig};
use pmlab_core::geometry::Geometry;
use pmlab_core::nonlinearity::{compute_constants, Constants, Nonlinearity, Side};
use pmlab_core::solver::{build_u0, solve, Grid, InitialDatum, ProblemSpec, Region, SpaceTimeField};
use pmlab_core::verification::{
    catalog_side, check_catalog, report_file_name, verify_estimates, ComparisonReport, KeyValue,
};

use crate::config::{RunConfig, T0Choice, UsageError};

/// Samples of the structural hypotheses; gamma2 uses a finer grid anyway.
const HYPOTHESIS_SAMPLES: usize = 4000;
/// Sample times of the interface lemma checks.
const LEMMA_SAMPLES: usize = 1000;
/// Sample grid of the comparison checks.
const CATALOG_GRID: usize = 200;

/// Outcome of a subcommand that ran to completion.
pub struct Outcome {
    pub passed: bool,
    pub run_dir: Option<PathBuf>,
}

/// Configuration with the nonlinearity, its constants and t0 resolved.
pub struct Resolved {
    pub cfg: RunConfig,
    pub nl: Nonlinearity,
    pub constants: Constants,
    pub t0: f64,
}

impl Resolved {
    pub fn new(cfg: RunConfig) -> anyhow::Result<Self> {
        let nl = Nonlinearity::from_name(&cfg.phi)?;
        let constants = compute_constants(&nl, HYPOTHESIS_SAMPLES)?;
        let t0 = match cfg.t0 {
            T0Choice::Auto => constants.t0_max,
            T0Choice::Value(t0) => t0,
        };
        Ok(Self { cfg, nl, constants, t0 })
    }

    fn grid(&self) -> Grid {
        match self.cfg.dt_max {
            Some(dt) => Grid::new(self.cfg.n, dt),
            None => Grid::for_t0(self.cfg.n, self.t0),
        }
    }

    fn geometry(&self) -> anyhow::Result<Geometry> {
        Ok(Geometry::new(&self.nl, self.t0)?)
    }

    fn suite(&self, eps: f64) -> SuiteConfig {
        SuiteConfig {
            grid: self.grid(),
            shape_q1: self.cfg.shape,
            shape_q3: self.cfg.shape,
            t_end_factor: self.cfg.t_end_factor,
            ..SuiteConfig::new(self.t0, eps, self.cfg.n)
        }
    }

    /// Creates `<out>/run_<timestamp>/` with `config.txt`.
    fn run_dir(&self) -> anyhow::Result<PathBuf> {
        let stamp = chrono::Local::now().format("%Y%m%d_%H%M%S_%3f");
        let mut dir = self.cfg.out.join(format!("run_{stamp}"));
        let mut k = 1;
        loop {
            fs::create_dir_all(&self.cfg.out).with_context(|| format!("creating {}", self.cfg.out.display()))?;
            match fs::create_dir(&dir) {
                Ok(()) => break,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    dir = self.cfg.out.join(format!("run_{stamp}_{k}"));
                    k += 1;
                }
                Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
            }
        }
        write_file(&dir.join("config.txt"), self.cfg.to_text(self.t0).as_bytes())?;
        Ok(dir)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Runs `body` inside a fresh run directory. Numerical failures leave a
/// `diagnostics.txt` there before propagating.
fn in_run_dir(res: &Resolved, body: impl FnOnce(&Path) -> anyhow::Result<bool>) -> anyhow::Result<Outcome> {
    let dir = res.run_dir()?;
    match body(&dir) {
        Ok(passed) => Ok(Outcome {
            passed,
            run_dir: Some(dir),
        }),
        Err(e) => {
            let mut text = format!("{e:#}\n");
            if let Some(core) = e.downcast_ref::<pmlab_core::Error>() {
                text.push_str(&format!("{core:?}\n"));
            }
            write_file(&dir.join("diagnostics.txt"), text.as_bytes())?;
            Err(e.context(format!("run directory {}", dir.display())))
        }
    }
}

pub fn constants(res: &Resolved) -> anyhow::Result<Outcome> {
    let k = &res.constants;
    let mut out = std::io::stdout().lock();
    writeln!(out, "phi: {}", res.nl.name())?;
    writeln!(out, "phi'(1): {}", k.phi1_at_1)?;
    writeln!(out, "phi'''(1): {}", k.phi3_at_1)?;
    writeln!(out, "gamma0={}", k.gamma0)?;
    writeln!(out, "gamma1={}", k.gamma1)?;
    writeln!(out, "gamma2={}", k.gamma2)?;
    for (i, b) in k.t0_bounds.iter().enumerate() {
        let mark = if i == k.binding { "  (binding)" } else { "" };
        writeln!(out, "bound {} = {}{mark}", b.label, b.value)?;
    }
    writeln!(out, "t0_max={:e}", k.t0_max)?;
    writeln!(out, "discriminant_bound={:e}", k.discriminant_bound)?;
    Ok(Outcome {
        passed: true,
        run_dir: None,
    })
}

/// How the standalone Q4 solve gets its initial datum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Q4Datum {
    /// Bridged terminal data of Q1 and Q3.
    Trace,
    /// u = 0, an equilibrium.
    Constant,
}

pub fn solve_region(res: &Resolved, region: Region, datum: Q4Datum) -> anyhow::Result<Outcome> {
    if region == Region::Q2 {
        return Err(UsageError("q2 is the time reflection of t; solve region t instead".into()).into());
    }
    let eps = res.cfg.eps;
    if region == Region::T && eps >= res.t0 {
        return Err(UsageError(format!("region t needs eps < t0, got eps = {eps}, t0 = {:e}", res.t0)).into());
    }
    let g = res.geometry()?;
    in_run_dir(res, |dir| {
        let grid = res.grid();
        let field = match region {
            Region::Q1 => solve(&ProblemSpec::q1(&g, eps, build_u0(Region::Q1, &g.b, res.cfg.shape)?)?, &grid)?,
            Region::Q3 => solve(&ProblemSpec::q3(&g, eps, build_u0(Region::Q3, &g.c, res.cfg.shape)?)?, &grid)?,
            Region::T => solve(&ProblemSpec::t_region(&g, eps)?, &grid)?,
            _ => {
                let initial = match datum {
                    Q4Datum::Constant => InitialDatum::constant(Region::Q4, 0.0),
                    Q4Datum::Trace => {
                        let suite = res.suite(eps);
                        let q1 = solve(&ProblemSpec::q1(&g, eps, build_u0(Region::Q1, &g.b, suite.shape_q1)?)?, &grid)?;
                        let q3 = solve(&ProblemSpec::q3(&g, eps, build_u0(Region::Q3, &g.c, suite.shape_q3)?)?, &grid)?;
                        q4_trace(&q1, &q3, suite.bridge_width.max(4.0 / res.cfg.n as f64))?.0
                    }
                };
                let spec = ProblemSpec::q4(&res.nl, eps, res.t0, res.cfg.t_end_factor * res.t0, initial)?;
                solve(&spec, &grid)?
            }
        };
        field.export_csv(&dir.join(format!("fields_{}.csv", region.label())))?;
        let report = verify_estimates(&field, &g, &res.constants, res.cfg.delta)?;
        write_json(&dir.join(report_file_name(region, eps)), &report)?;
        println!("{}", report.to_text());
        summarize(&field);
        Ok(report.passed)
    })
}

fn summarize(field: &SpaceTimeField) {
    let (t_lo, t_hi) = field.time_span();
    println!(
        "{}: {} levels on t in [{t_lo:e}, {t_hi:e}], {} rejected steps",
        field.region,
        field.levels.len(),
        field.stats.rejected_steps
    );
}

#[derive(Serialize)]
struct CatalogSide {
    side: &'static str,
    /// Why the side could not be built, if it could not.
    unavailable: Option<String>,
    reports: Vec<ComparisonReport>,
}

pub fn verify(res: &Resolved) -> anyhow::Result<Outcome> {
    let g = res.geometry()?;
    let eps = res.cfg.eps;
    let u0 = build_u0(Region::Q1, &g.b, res.cfg.shape)?;
    in_run_dir(res, |dir| {
        let lemmas = g.lemma_checks(LEMMA_SAMPLES)?;
        write_json(&dir.join("report_lemmas.json"), &lemmas)?;
        for f in &lemmas.families {
            println!("lemma {}: margin {:e} {}", f.name, f.margin, verdict(f.passed));
        }
        let mut passed = lemmas.passed;
        let mut sides = Vec::new();
        for (side, label) in [(Side::Forward, "forward"), (Side::Backward, "backward")] {
            let entry = match catalog_side(&g, &res.constants, eps, &u0, side) {
                Ok(cat) => CatalogSide {
                    side: label,
                    unavailable: None,
                    reports: check_catalog(&cat, CATALOG_GRID, CATALOG_GRID)?,
                },
                Err(pmlab_core::Error::Configuration(why)) => CatalogSide {
                    side: label,
                    unavailable: Some(why),
                    reports: Vec::new(),
                },
                Err(e) => return Err(e.into()),
            };
            if let Some(why) = &entry.unavailable {
                println!("{label} catalog unavailable: {why}");
                passed = false;
            }
            for r in &entry.reports {
                println!("candidate {}: worst margin {:e} {}", r.name, r.worst_margin(), verdict(r.passed));
                passed &= r.passed;
            }
            sides.push(entry);
        }
        write_json(&dir.join("report_catalog.json"), &sides)?;
        Ok(passed)
    })
}

pub fn glue_all(res: &Resolved) -> anyhow::Result<Outcome> {
    let cfg = res.suite(res.cfg.eps);
    in_run_dir(res, |dir| {
        let (g, fields) = run_suite(&res.nl, &cfg)?;
        let glued = glue(fields, &g)?;
        glued.export_csv(&dir.join("fields_glued.csv"))?;
        let checks = glued.headline_checks();
        let seams = glued.seams();
        #[derive(Serialize)]
        struct GlueReport<'a> {
            t0: f64,
            eps: f64,
            shifts: pmlab_core::assembly::GaugeShifts,
            bridge: pmlab_core::assembly::Bridge,
            max_jumps: Vec<(&'a str, [f64; 3])>,
            checks: &'a pmlab_core::assembly::HeadlineChecks,
            passed: bool,
        }
        let report = GlueReport {
            t0: glued.t0,
            eps: glued.eps,
            shifts: glued.shifts,
            bridge: glued.bridge,
            max_jumps: seams.seams.iter().map(|s| (s.name.as_str(), s.max_jump)).collect(),
            checks: &checks,
            passed: checks.passed(),
        };
        write_json(&dir.join("report_glue.json"), &report)?;
        println!("supercritical set at t = 0: {:?}", checks.initial_set);
        println!(
            "transcritical start: endpoint error {:e} (2h = {:e}) {}",
            checks.start_error,
            2.0 * checks.h,
            verdict(checks.transcritical_start)
        );
        println!(
            "extinction: max |u_r| = {} over {} levels in [1.05 t0, 2 t0] {}",
            checks.max_ur_after,
            checks.late_levels,
            verdict(checks.extinct)
        );
        for s in &seams.seams {
            println!("seam {}: max jumps u {:e}, u_r {:e}, u_rr {:e}", s.name, s.max_jump[0], s.max_jump[1], s.max_jump[2]);
        }
        Ok(checks.passed())
    })
}

pub fn sweep(res: &Resolved) -> anyhow::Result<Outcome> {
    let cfg = res.suite(res.cfg.eps_ladder[0]);
    in_run_dir(res, |dir| {
        let result = eps_sweep(&res.nl, &cfg, &res.cfg.eps_ladder)?;
        write_json(&dir.join("sweep.json"), &result)?;
        for r in &result.regions {
            println!("{}: distances {:?}, order {:.3} {}", r.region, r.distances, r.order, verdict(r.decreasing));
        }
        println!("fitted order: {:.3}", result.order);
        println!(
            "limit on beta: max |u_r - 1| = {:e}, max |u_rr - b| = {:e}",
            result.boundary.max_ur_defect, result.boundary.max_urr_defect
        );
        for w in &result.warnings {
            println!("warning: {w}");
        }
        Ok(result.converged)
    })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
