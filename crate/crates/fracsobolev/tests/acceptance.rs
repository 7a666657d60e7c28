//! Acceptance suite. One test per criterion; each prints a PASS/FAIL line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).
//!
//! Criterion 13 (CLI determinism) lives in the CLI crate's acceptance test.

use fracsobolev::bubbles::{
    blowup_identity_check, bubble_critical_limit, bubble_l2_scaling, bubble_on_manifold,
    euclidean_rayleigh, BubbleConfig, EuclideanGrid,
};
use fracsobolev::fields::band_limited;
use fracsobolev::kernel::{
    check_k3_bounds, check_k4_blowup, eval_kernel, FracParams, KernelSpec,
};
use fracsobolev::manifold::{
    build_grid, geodesic_distance, partition_of_unity, Grid, ManifoldDesc, TangentVector,
};
use fracsobolev::sobolev::{
    gagliardo_seminorm_p, kernel_energy, localized_norm_ratio, lp_norm_p, DiscreteFunction,
};
use fracsobolev::solver::{
    functional_i, functional_jk, gradient_i, solve_critical_continuation, solve_subcritical,
    ProblemData, SolveOpts,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::{Arc, LazyLock};
use std::time::Instant;

fn status(id: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {id}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn torus_grid(dim: usize, length: f64, res: usize) -> Arc<Grid> {
    Arc::new(build_grid(&ManifoldDesc::torus(dim, length).unwrap(), res).unwrap())
}

#[test]
fn criterion_01_trivial_kernel_identities() {
    let t0 = Instant::now();
    let grid = torus_grid(1, 2.0, 64);
    let params = FracParams::new(1, 0.4, 2.0).unwrap();
    let spec = KernelSpec::pure_fractional(params, 2.0).unwrap();
    let c = DiscreteFunction::constant(&grid, 2.75).unwrap();

    let semi = gagliardo_seminorm_p(&c, &params);
    let energy = kernel_energy(&c, &spec);
    // gradient of the nonlocal part alone: h = 0, f = 0 via q-term weight 0
    let h = DiscreteFunction::constant(&grid, 0.0).unwrap();
    let f = DiscreteFunction::constant(&grid, 1.0).unwrap();
    let data = ProblemData::new(&grid, spec, h, f, 2.0).unwrap();
    let zero_f = {
        // cancel the f-term by evaluating at the constant and subtracting the
        // known local part: with h = 0 the gradient minus the f-term is the
        // pure nonlocal part
        let g = gradient_i(&data, &c);
        let mut nonlocal = g.values().to_vec();
        for (j, v) in nonlocal.iter_mut().enumerate() {
            *v += data.f().values()[j] * 2.75 * grid.weight(j); // add back f|c|^{q-2}c w
        }
        nonlocal
    };
    let grad_max = zero_f.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let pass = semi.abs() <= 1e-12 && energy.abs() <= 1e-12 && grad_max <= 1e-12;
    status(
        "01 trivial-kernel-identities",
        pass,
        &format!(
            "seminorm {semi:.2e}, energy {energy:.2e}, nonlocal gradient max {grad_max:.2e}, {:.2}s",
            t0.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_homogeneity_suite() {
    let t0 = Instant::now();
    let grid = torus_grid(1, 2.0, 512);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let (p, s) = if trial % 2 == 0 { (2.0, 0.4) } else { (3.0, 0.3) };
        let params = FracParams::new(1, s, p).unwrap();
        let spec = KernelSpec::pure_fractional(params, 2.0).unwrap();
        let h = DiscreteFunction::constant(&grid, 0.7).unwrap();
        let f = DiscreteFunction::constant(&grid, 1.0).unwrap();
        let data = ProblemData::new(&grid, spec, h, f, 2.0).unwrap();
        let u = band_limited(&grid, 6, &mut rng);
        let lam: f64 = 0.2 + 2.8 * rng.gen::<f64>();
        let lam = if trial % 3 == 0 { -lam } else { lam };
        let scale = lam.abs().powf(p);

        let a = gagliardo_seminorm_p(&u.scaled(lam), &params);
        let b = scale * gagliardo_seminorm_p(&u, &params);
        worst = worst.max((a - b).abs() / b.max(1.0));

        let ja = functional_jk(&data, &u.scaled(lam));
        let jb = scale * functional_jk(&data, &u);
        worst = worst.max((ja - jb).abs() / jb.abs().max(1.0));
    }
    let pass = worst <= 1e-12;
    status(
        "02 homogeneity-suite",
        pass,
        &format!("worst relative defect {worst:.2e} over 100 fields, {:.2}s", t0.elapsed().as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn criterion_03_gradient_vs_finite_differences() {
    let t0 = Instant::now();
    let grid = torus_grid(1, 2.0, 128);
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let mut worst: f64 = 0.0;
    for &(p, s) in &[(2.0, 0.45), (3.0, 0.3)] {
        for &q in &[2.5, 3.0] {
            let params = FracParams::new(1, s, p).unwrap();
            let spec = KernelSpec::pure_fractional(params, 2.0).unwrap();
            let h = DiscreteFunction::constant(&grid, 0.8).unwrap();
            let f = DiscreteFunction::constant(&grid, 1.0).unwrap();
            let data = ProblemData::new(&grid, spec, h, f, q).unwrap();
            for _ in 0..5 {
                let u = band_limited(&grid, 4, &mut rng);
                let v = band_limited(&grid, 4, &mut rng);
                let g = gradient_i(&data, &u);
                let pairing: f64 = g.values().iter().zip(v.values()).map(|(a, b)| a * b).sum();
                let t = 1e-5;
                let shift = |sign: f64| {
                    DiscreteFunction::new(
                        &grid,
                        u.values()
                            .iter()
                            .zip(v.values())
                            .map(|(a, b)| a + sign * t * b)
                            .collect(),
                    )
                    .unwrap()
                };
                let fd = (functional_i(&data, &shift(1.0)) - functional_i(&data, &shift(-1.0)))
                    / (2.0 * t);
                worst = worst.max((fd - pairing).abs() / pairing.abs().max(1e-12));
            }
        }
    }
    let pass = worst <= 1e-5;
    status(
        "03 gradient-vs-finite-differences",
        pass,
        &format!("worst relative error {worst:.2e} over 20 states, {:.2}s", t0.elapsed().as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn criterion_04_bubble_l2_exponent() {
    // T^2 at resolution 96 with the pinned ladder. The injectivity radius
    // caps delta at L/4 and the resolved-bubble precondition caps L at 2.4,
    // so delta/eps stays in [1.4, 5.5] across the ladder: the captured mass
    // of U^2 still grows there, which flattens the fitted slope well below
    // 2s (and for s = 0.7 the profile's L^2 integral diverges outright, so
    // the asymptotic exponent is n - 2s, not 2s). The windows below are
    // asserted as stated; the measured slopes sit near 0.2-0.3.
    let t0 = Instant::now();
    let grid = torus_grid(2, 2.4, 96);
    let ladder = [0.4, 0.28, 0.2, 0.14, 0.1];
    let mut results = Vec::new();
    for &(s, lo, hi) in &[(0.3, 0.45, 0.75), (0.7, 1.25, 1.55)] {
        let params = FracParams::new(2, s, 2.0).unwrap();
        let cfg = BubbleConfig::new(params, [1.2, 1.2], 0.2, 0.55).unwrap();
        let rep = bubble_l2_scaling(&cfg, &grid, &ladder).unwrap();
        results.push((s, rep.slope, lo, hi, rep.divergent_profile));
    }
    let pass = results
        .iter()
        .all(|(_, slope, lo, hi, _)| *slope >= *lo && *slope <= *hi);
    let detail = results
        .iter()
        .map(|(s, slope, lo, hi, div)| {
            format!("s={s}: slope {slope:.3} vs window [{lo}, {hi}]{}", if *div { " (divergent L2 profile)" } else { "" })
        })
        .collect::<Vec<_>>()
        .join("; ");
    status(
        "04 bubble-l2-exponent",
        pass,
        &format!("{detail}, {:.2}s", t0.elapsed().as_secs_f64()),
    );
    assert!(pass, "{detail}");
}

#[test]
fn criterion_05_critical_norm_convergence() {
    let t0 = Instant::now();
    let grid = torus_grid(2, 2.4, 128);
    let params = FracParams::new(2, 0.5, 2.0).unwrap();
    let cfg = BubbleConfig::new(params, [1.2, 1.2], 0.2, 0.55).unwrap();
    let egrid = EuclideanGrid::new(2, 20.0, 256).unwrap();
    let ladder = [0.4, 0.28, 0.2, 0.14, 0.1];
    let rep = bubble_critical_limit(&cfg, &grid, &ladder, &egrid).unwrap();

    // the reference cross-checks the analytic radial integral: for n = 2,
    // s = 1/2 the critical power is (1+|x|^2)^{-2} whose integral is pi
    let ref_err = (rep.reference - PI).abs() / PI;
    let gaps: Vec<f64> = rep
        .values
        .iter()
        .map(|v| (v - rep.reference).abs() / rep.reference)
        .collect();
    let final_gap = *gaps.last().unwrap();
    let monotone = gaps[2] >= gaps[3] && gaps[3] >= gaps[4];

    let pass = ref_err <= 0.01 && final_gap <= 0.05 && monotone;
    status(
        "05 critical-norm-convergence",
        pass,
        &format!(
            "reference vs pi {ref_err:.4}, final gap {final_gap:.4}, last-3 gaps {:.4}/{:.4}/{:.4}, {:.2}s",
            gaps[2], gaps[3], gaps[4], t0.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

/// Shared heavy fixture for criteria 6 and 12: the bubble family on T^2 at
/// resolution 160 and the box-40 Euclidean references at two resolutions.
struct BubbleFamily {
    eps: Vec<f64>,
    energies: Vec<f64>,
    crit_norm_sq: Vec<f64>,
    reference_extrapolated: f64,
    k_inv_ladder: Vec<f64>,
    k_inv_extrapolated: f64,
}

static FAMILY: LazyLock<BubbleFamily> = LazyLock::new(|| {
    let grid = torus_grid(2, 2.4, 160);
    let params = FracParams::new(2, 0.5, 2.0).unwrap();
    let spec = KernelSpec::pure_fractional(params, 2.0).unwrap();
    let cfg = BubbleConfig::new(params, [1.2, 1.2], 0.2, 0.55).unwrap();
    let eps = vec![0.4, 0.3, 0.2, 0.15, 0.12];
    let mut energies = Vec::new();
    let mut crit_norm_sq = Vec::new();
    for &e in &eps {
        let u = bubble_on_manifold(&cfg.with_eps(e), &grid).unwrap();
        energies.push(kernel_energy(&u, &spec));
        crit_norm_sq.push(lp_norm_p(&u, 4.0).powf(0.5));
    }
    // Euclidean reference [U]^2 on the box of radius 40; the quadrature bias
    // is O(h^{2-2s}) = O(h) for s = 1/2, so Richardson over a resolution
    // doubling is first order in h
    let mut k_inv_ladder = Vec::new();
    let mut seminorms = Vec::new();
    let mut crits = Vec::new();
    for res in [80, 160, 320] {
        let egrid = EuclideanGrid::new(2, 40.0, res).unwrap();
        let rep = euclidean_rayleigh(&params, &egrid).unwrap();
        k_inv_ladder.push(rep.k_inverse);
        seminorms.push(rep.seminorm2);
        crits.push(rep.crit_norm_sq);
    }
    let sem_extrap = 2.0 * seminorms[2] - seminorms[1];
    let crit_extrap = crits[2]; // second-order accurate already
    BubbleFamily {
        eps,
        energies,
        crit_norm_sq,
        reference_extrapolated: sem_extrap,
        k_inv_ladder,
        k_inv_extrapolated: sem_extrap / crit_extrap,
    }
});

#[test]
fn criterion_06_energy_limsup() {
    let t0 = Instant::now();
    let fam = &*FAMILY;
    let final_ratio = fam.energies.last().unwrap() / fam.reference_extrapolated;
    let pass = (0.85..=1.10).contains(&final_ratio);
    status(
        "06 energy-limsup",
        pass,
        &format!(
            "final energy {:.4} / reference {:.4} = ratio {final_ratio:.4} in [0.85, 1.10], {:.2}s",
            fam.energies.last().unwrap(),
            fam.reference_extrapolated,
            t0.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_blowup_identity() {
    let t0 = Instant::now();
    let params = FracParams::new(1, 0.4, 2.0).unwrap();
    let spec = KernelSpec::pure_fractional(params, 2.0).unwrap();
    let cfg = BubbleConfig::new(params, [1.0137, 0.0], 0.2, 0.25).unwrap();

    let grid = torus_grid(1, 2.0, 256);
    let rep = blowup_identity_check(&cfg, &grid, &spec, 80).unwrap();

    let fine = torus_grid(1, 2.0, 512);
    let rep_fine = blowup_identity_check(&cfg, &fine, &spec, 160).unwrap();

    let pass = rep.rel_gap <= 0.03 && rep_fine.rel_gap < rep.rel_gap;
    status(
        "07 blowup-identity",
        pass,
        &format!(
            "gap {:.5} at res 256 (<= 3%), {:.5} after halving spacing, {:.2}s",
            rep.rel_gap,
            rep_fine.rel_gap,
            t0.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_kernel_axioms() {
    let t0 = Instant::now();
    // K2: the kernel depends on the distance only, so symmetry is exact
    let desc = ManifoldDesc::torus(2, 2.0).unwrap();
    let params = FracParams::new(2, 0.5, 2.0).unwrap();
    let tail = KernelSpec::fractional_plus_tail(params, 1.1, 30.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    let mut k2_exact = true;
    for _ in 0..1000 {
        let a = [rng.gen::<f64>() * 2.0, rng.gen::<f64>() * 2.0];
        let b = [rng.gen::<f64>() * 2.0, rng.gen::<f64>() * 2.0];
        let d1 = geodesic_distance(&desc, &a, &b);
        if d1 == 0.0 {
            continue;
        }
        let d2 = geodesic_distance(&desc, &b, &a);
        if eval_kernel(&tail, d1).unwrap() != eval_kernel(&tail, d2).unwrap() {
            k2_exact = false;
        }
    }

    // K3: exact pinch (1, 1) for the pure kernel
    let grid = torus_grid(1, 2.0, 64);
    let pure1 = KernelSpec::pure_fractional(FracParams::new(1, 0.45, 2.0).unwrap(), 2.0).unwrap();
    let (inf, sup) = check_k3_bounds(&pure1, &grid);
    let k3_exact = inf == 1.0 && sup == 1.0;

    // K4: zero deviation for the pure kernel on the flat torus, strictly
    // decreasing ladder for the tail kernel
    let pure2 = KernelSpec::pure_fractional(params, 2.0).unwrap();
    let mut pairs = Vec::new();
    while pairs.len() < 30 {
        let x = [rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0];
        let y = [rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0];
        if x[0] * x[0] + x[1] * x[1] > 1.0 || y[0] * y[0] + y[1] * y[1] > 1.0 {
            continue;
        }
        if ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt() < 1e-2 {
            continue;
        }
        pairs.push((
            TangentVector::new([1.0, 1.0], x),
            TangentVector::new([1.0, 1.0], y),
        ));
    }
    let mut pure_flat_zero = true;
    let mut tail_devs = Vec::new();
    for &eps in &[0.2, 0.1, 0.05] {
        let dev_pure = check_k4_blowup(&pure2, &desc, &[1.0, 1.0], &pairs, eps).unwrap();
        if dev_pure > 1e-12 {
            pure_flat_zero = false;
        }
        tail_devs.push(check_k4_blowup(&tail, &desc, &[1.0, 1.0], &pairs, eps).unwrap());
    }
    let tail_decreasing = tail_devs[0] > tail_devs[1] && tail_devs[1] > tail_devs[2];

    let pass = k2_exact && k3_exact && pure_flat_zero && tail_decreasing;
    status(
        "08 kernel-axioms",
        pass,
        &format!(
            "K2 exact {k2_exact}, K3 pinch ({inf}, {sup}), K4 pure flat zero {pure_flat_zero}, tail ladder {:.4}/{:.4}/{:.4}, {:.2}s",
            tail_devs[0], tail_devs[1], tail_devs[2], t0.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_norm_equivalence_band() {
    let t0 = Instant::now();
    let grid = torus_grid(1, 1.0, 256);
    let params = FracParams::new(1, 0.4, 2.0).unwrap();
    let parts = partition_of_unity(&grid, &[vec![0.0], vec![0.5]], 0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let mut ratios = Vec::new();
    let mut jensen_ok = true;
    for _ in 0..50 {
        let u = band_limited(&grid, 6, &mut rng);
        let (floor, ratio) = localized_norm_ratio(&u, &parts, &params).unwrap();
        if ratio < floor - 1e-12 {
            jensen_ok = false;
        }
        ratios.push(ratio);
    }
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = max / min;
    let pass = spread <= 3.0 && jensen_ok;
    status(
        "09 norm-equivalence-band",
        pass,
        &format!(
            "ratio band [{min:.4}, {max:.4}], spread {spread:.3} (<= 3), Jensen {jensen_ok}, {:.2}s",
            t0.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_solver_constant_data() {
    let t0 = Instant::now();
    let grid = torus_grid(2, 2.0, 12);
    let params = FracParams::new(2, 0.5, 2.0).unwrap();
    let spec = KernelSpec::pure_fractional(params, 2.0).unwrap();
    let h = DiscreteFunction::constant(&grid, 1.3).unwrap();
    let f = DiscreteFunction::constant(&grid, 0.7).unwrap();
    let data = ProblemData::new(&grid, spec, h, f, 2.0).unwrap();
    let res = solve_subcritical(&data, &data.constant_init(), &SolveOpts::default()).unwrap();

    let closed_form = 1.3 / (2.0 * 0.7);
    let mu_err = (res.mu - closed_form).abs() / closed_form;
    let defect_ok = res.trace.iter().all(|e| e.constraint_defect <= 1e-8);
    let monotone = res.trace.windows(2).all(|w| w[1].energy <= w[0].energy);

    let pass = mu_err <= 1e-6 && defect_ok && monotone;
    status(
        "10 solver-constant-data",
        pass,
        &format!(
            "mu {:.9} vs closed form {closed_form:.9} (rel {mu_err:.2e}), defect ok {defect_ok}, trace monotone {monotone}, {:.2}s",
            res.mu,
            t0.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_continuation_gaps() {
    let t0 = Instant::now();
    let length = 2.4;
    let grid = torus_grid(2, length, 24);
    let params = FracParams::new(2, 0.5, 2.0).unwrap();
    let spec = KernelSpec::pure_fractional(params, 2.0).unwrap();
    let omega = 2.0 * PI / length;
    let f = DiscreteFunction::from_fn(&grid, |p| {
        1.0 + 0.4 * (omega * p[0]).cos() * (omega * p[1]).cos()
    })
    .unwrap();
    let h = DiscreteFunction::from_fn(&grid, |p| 0.5 + 0.3 * (omega * p[0]).cos()).unwrap();
    let data = ProblemData::new(&grid, spec, h, f.clone(), 2.2).unwrap();
    let schedule = [2.2, 2.6, 3.0, 3.4, 3.8];
    let cont = solve_critical_continuation(&data, &schedule, &SolveOpts::default()).unwrap();
    let gaps = cont.gaps();
    let nonincreasing = gaps[1] >= gaps[2] && gaps[2] >= gaps[3];

    // Hoelder direction at every stage:
    // 1 <= (int f)^{1 - q/2*} (int f |u_q|^{2*})^{q/2*}
    let int_f = lp_norm_p(&f, 1.0);
    let mut hoelder_ok = true;
    {
        // recompute stage minimizers by re-running the warm-started chain
        let mut current = data.constant_init();
        for &q in &schedule {
            let stage = data.with_q(q).unwrap();
            let res = solve_subcritical(&stage, &current, &SolveOpts::default()).unwrap();
            let crit_mass: f64 = (0..grid.len())
                .map(|i| {
                    f.values()[i] * res.u.values()[i].abs().powi(4) * grid.weight(i)
                })
                .sum();
            let rhs = int_f.powf(1.0 - q / 4.0) * crit_mass.powf(q / 4.0);
            if rhs < 1.0 - 1e-10 {
                hoelder_ok = false;
            }
            current = res.u.clone();
        }
    }

    let pass = nonincreasing && hoelder_ok;
    status(
        "11 continuation-gaps",
        pass,
        &format!(
            "mu stages {:?}, gaps {:?}, last-3 nonincreasing {nonincreasing}, Hoelder {hoelder_ok}, {:.2}s",
            cont.stages
                .iter()
                .map(|(q, m)| format!("({q}, {m:.6})"))
                .collect::<Vec<_>>(),
            gaps.iter().map(|g| format!("{g:.6}")).collect::<Vec<_>>(),
            t0.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_12_best_constant_coherence() {
    let t0 = Instant::now();
    let fam = &*FAMILY;
    // smallest empirical C1 covering the bubble family (no L^2 help):
    // the binding constraint sits at the smallest eps
    let c1 = fam
        .eps
        .iter()
        .zip(fam.crit_norm_sq.iter().zip(&fam.energies))
        .map(|(_, (t, e))| t / e)
        .fold(f64::NEG_INFINITY, f64::max);
    let k_est = 1.0 / fam.k_inv_extrapolated;
    let ratio = c1 / k_est;
    let convergent = fam.k_inv_ladder[0] < fam.k_inv_ladder[1]
        && fam.k_inv_ladder[1] < fam.k_inv_ladder[2];
    let pass = ratio >= 0.9 && convergent;
    status(
        "12 best-constant-coherence",
        pass,
        &format!(
            "C1 {c1:.5} vs K estimate {k_est:.5}: ratio {ratio:.4} (>= 0.9); K^-1 ladder {:.4}/{:.4}/{:.4} extrapolated {:.4}, {:.2}s",
            fam.k_inv_ladder[0],
            fam.k_inv_ladder[1],
            fam.k_inv_ladder[2],
            fam.k_inv_extrapolated,
            t0.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}
