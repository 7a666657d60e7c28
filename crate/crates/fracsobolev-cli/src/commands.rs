//! One function per subcommand; each writes its report files into the run
//! directory and returns the list of files written.

use crate::config::*;
use fracsobolev::bubbles::{bubble_sweep, euclidean_rayleigh, BubbleConfig, EuclideanGrid};
use fracsobolev::error::{Error, Result};
use fracsobolev::fields::band_limited;
use fracsobolev::kernel::{check_k1_integrable, check_k3_bounds, check_k4_blowup, FracParams};
use fracsobolev::manifold::{partition_of_unity, TangentVector};
use fracsobolev::sobolev::localized_norm_ratio;
use fracsobolev::solver::{
    check_existence_condition, solve_critical_continuation, solve_subcritical, ProblemData,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};

pub struct Written {
    pub files: Vec<PathBuf>,
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = out.join(name);
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    std::fs::write(&path, text + "\n")
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    files.push(path);
    Ok(())
}

fn write_text(out: &Path, name: &str, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = out.join(name);
    std::fs::write(&path, text)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    files.push(path);
    Ok(())
}

#[derive(Serialize)]
struct VolumeReport {
    total_weight: f64,
    expected_volume: f64,
    rel_error: f64,
}

pub fn cmd_grid(cfg: &GridConfig, out: &Path) -> Result<Written> {
    let (desc, grid) = cfg.build()?;
    let total = grid.total_weight();
    let expected = desc.volume();
    let mut files = Vec::new();
    write_json(out, "grid.json", &*grid, &mut files)?;
    write_json(
        out,
        "volume_report.json",
        &VolumeReport {
            total_weight: total,
            expected_volume: expected,
            rel_error: (total - expected).abs() / expected,
        },
        &mut files,
    )?;
    Ok(Written { files })
}

#[derive(Serialize)]
struct K3Report {
    inf: f64,
    sup: f64,
    lambda_bound: f64,
    passes: bool,
}

#[derive(Serialize)]
struct K4Row {
    eps: f64,
    max_deviation: f64,
}

#[derive(Serialize)]
struct KernelReport {
    k1_integral: f64,
    k3: K3Report,
    k4: Vec<K4Row>,
    k4_monotone: bool,
}

pub fn cmd_kernel_check(cfg: &KernelCheckConfig, out: &Path, seed: u64) -> Result<Written> {
    let (desc, grid) = cfg.grid.build()?;
    let spec = cfg.kernel;

    let k1 = check_k1_integrable(&spec, &grid);
    let (inf, sup) = check_k3_bounds(&spec, &grid);
    let lambda = spec.lambda_bound();

    // seeded pairs in the tangent ball at x0
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4b4b);
    let mut pairs = Vec::new();
    let dim = desc.dim;
    while pairs.len() < cfg.k4.n_pairs {
        let mut draw = || {
            let mut v = [0.0f64; 2];
            for c in v.iter_mut().take(dim) {
                *c = (rng.gen::<f64>() * 2.0 - 1.0) * cfg.k4.radius;
            }
            v
        };
        let x = draw();
        let y = draw();
        let norm = |v: &[f64; 2]| (v[0] * v[0] + v[1] * v[1]).sqrt();
        if norm(&x) > cfg.k4.radius || norm(&y) > cfg.k4.radius {
            continue;
        }
        let sep = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        if sep < 1e-2 * cfg.k4.radius {
            continue;
        }
        let base = [cfg.k4.x0[0], *cfg.k4.x0.get(1).unwrap_or(&0.0)];
        pairs.push((TangentVector::new(base, x), TangentVector::new(base, y)));
    }
    let mut rows = Vec::new();
    for &eps in &cfg.k4.eps_ladder {
        let dev = check_k4_blowup(&spec, &desc, &cfg.k4.x0, &pairs, eps)?;
        rows.push(K4Row {
            eps,
            max_deviation: dev,
        });
    }
    let monotone = rows
        .windows(2)
        .all(|w| w[1].max_deviation <= w[0].max_deviation + 1e-12);

    let mut files = Vec::new();
    write_json(
        out,
        "kernel_report.json",
        &KernelReport {
            k1_integral: k1,
            k3: K3Report {
                inf,
                sup,
                lambda_bound: lambda,
                passes: 1.0 / lambda < inf && sup < lambda,
            },
            k4: rows,
            k4_monotone: monotone,
        },
        &mut files,
    )?;
    Ok(Written { files })
}

pub fn cmd_bubble_sweep(cfg: &BubbleSweepConfig, out: &Path) -> Result<Written> {
    let (_, grid) = cfg.grid.build()?;
    let params = cfg.params.to_params()?;
    let center = [cfg.center[0], *cfg.center.get(1).unwrap_or(&0.0)];
    let first = *cfg
        .ladder
        .first()
        .ok_or_else(|| Error::Config("empty ladder".into()))?;
    let bubble = BubbleConfig::new(params, center, first, cfg.delta)?;
    let egrid = EuclideanGrid::new(params.n(), cfg.euclid.r_box, cfg.euclid.resolution)?;
    let report = bubble_sweep(&bubble, &grid, &cfg.ladder, &cfg.kernel, &egrid)?;
    let mut files = Vec::new();
    write_text(out, "sweep.csv", &report.to_csv(), &mut files)?;
    write_json(out, "sweep_summary.json", &report, &mut files)?;
    Ok(Written { files })
}

#[derive(Serialize)]
struct BestConstantReport {
    estimates: Vec<fracsobolev::bubbles::RayleighReport>,
    extrapolated_k_inverse: f64,
    extrapolated_k: f64,
}

pub fn cmd_best_constant(cfg: &BestConstantConfig, out: &Path) -> Result<Written> {
    if cfg.resolutions.is_empty() {
        return Err(Error::Config("need at least one resolution".into()));
    }
    let params = FracParams::new(cfg.n, cfg.s, 2.0)?;
    let mut estimates = Vec::new();
    for &res in &cfg.resolutions {
        let egrid = EuclideanGrid::new(cfg.n, cfg.r_box, res)?;
        estimates.push(euclidean_rayleigh(&params, &egrid)?);
    }
    // first-order Richardson in the spacing across the last two resolutions
    let k_inv = if estimates.len() >= 2 {
        let a = &estimates[estimates.len() - 2];
        let b = &estimates[estimates.len() - 1];
        let ratio = (a.resolution as f64) / (b.resolution as f64); // h_b / h_a
        let order = 2.0 - 2.0 * cfg.s;
        let factor = (1.0 / ratio).powf(order) - 1.0;
        let sem = b.seminorm2 + (b.seminorm2 - a.seminorm2) / factor;
        sem / b.crit_norm_sq
    } else {
        estimates[0].k_inverse
    };
    let mut csv = String::from("resolution,seminorm2,crit_norm_sq,k_inverse\r\n");
    for e in &estimates {
        csv.push_str(&format!(
            "{},{},{},{}\r\n",
            e.resolution, e.seminorm2, e.crit_norm_sq, e.k_inverse
        ));
    }
    let mut files = Vec::new();
    write_text(out, "convergence.csv", &csv, &mut files)?;
    write_json(
        out,
        "best_constant.json",
        &BestConstantReport {
            estimates,
            extrapolated_k_inverse: k_inv,
            extrapolated_k: 1.0 / k_inv,
        },
        &mut files,
    )?;
    Ok(Written { files })
}

#[derive(Serialize)]
struct ContinuationJson {
    stages: Vec<(f64, f64)>,
    gaps: Vec<f64>,
}

pub fn cmd_solve(cfg: &SolveConfig, out: &Path, seed: u64) -> Result<Written> {
    let (_, grid) = cfg.grid.build()?;
    let h = cfg.h.realize(&grid)?;
    let f = cfg.f.realize(&grid)?;
    let opts = cfg.opts.to_opts(seed);
    let mut files = Vec::new();
    match (&cfg.q, &cfg.schedule) {
        (Some(q), None) => {
            let data = ProblemData::new(&grid, cfg.kernel, h, f, *q)?;
            let res = solve_subcritical(&data, &data.constant_init(), &opts)?;
            write_json(out, "solve_result.json", &res.to_json(), &mut files)?;
            write_text(out, "trace.csv", &res.trace_csv(), &mut files)?;
        }
        (None, Some(schedule)) => {
            let q0 = *schedule
                .first()
                .ok_or_else(|| Error::Config("empty schedule".into()))?;
            let data = ProblemData::new(&grid, cfg.kernel, h, f, q0)?;
            let cont = solve_critical_continuation(&data, schedule, &opts)?;
            write_json(
                out,
                "continuation.json",
                &ContinuationJson {
                    stages: cont.stages.clone(),
                    gaps: cont.gaps(),
                },
                &mut files,
            )?;
            write_json(
                out,
                "solve_result.json",
                &cont.final_result.to_json(),
                &mut files,
            )?;
            write_text(out, "trace.csv", &cont.final_result.trace_csv(), &mut files)?;
        }
        _ => {
            return Err(Error::Config(
                "config must set exactly one of 'q' or 'schedule'".into(),
            ))
        }
    }
    Ok(Written { files })
}

pub fn cmd_condition(cfg: &ConditionConfig, out: &Path) -> Result<Written> {
    let (_, grid) = cfg.grid.build()?;
    let h = cfg.h.realize(&grid)?;
    let f = cfg.f.realize(&grid)?;
    let pstar = cfg.kernel.params().pstar();
    let data = ProblemData::new(&grid, cfg.kernel, h, f, pstar)?;
    let report = check_existence_condition(&data, cfg.kconst, cfg.continuation_mu)?;
    let mut files = Vec::new();
    write_json(out, "condition.json", &report, &mut files)?;
    Ok(Written { files })
}

#[derive(Serialize)]
struct EquivalenceReport {
    ratios: Vec<f64>,
    min: f64,
    max: f64,
    spread: f64,
    jensen_floor: f64,
    jensen_ok: bool,
}

pub fn cmd_equivalence(cfg: &EquivalenceConfig, out: &Path, seed: u64) -> Result<Written> {
    let (_, grid) = cfg.grid.build()?;
    let params = cfg.params.to_params()?;
    let parts = partition_of_unity(&grid, &cfg.centers, cfg.delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe4_11);
    let mut ratios = Vec::new();
    let mut floor = 0.0;
    let mut jensen_ok = true;
    for _ in 0..cfg.n_fields {
        let u = band_limited(&grid, cfg.max_mode, &mut rng);
        let (fl, ratio) = localized_norm_ratio(&u, &parts, &params)?;
        floor = fl;
        if ratio < fl - 1e-12 {
            jensen_ok = false;
        }
        ratios.push(ratio);
    }
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut csv = String::from("sample,ratio\r\n");
    for (i, r) in ratios.iter().enumerate() {
        csv.push_str(&format!("{i},{r}\r\n"));
    }
    let mut files = Vec::new();
    write_text(out, "ratios.csv", &csv, &mut files)?;
    write_json(
        out,
        "equivalence.json",
        &EquivalenceReport {
            ratios,
            min,
            max,
            spread: max / min,
            jensen_floor: floor,
            jensen_ok,
        },
        &mut files,
    )?;
    Ok(Written { files })
}
