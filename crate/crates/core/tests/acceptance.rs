//! One PASS/FAIL line per acceptance criterion. Failures are reported, not asserted,
//! so the run always completes; the process exits non-zero only if a check errors out.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use hpvem::analysis::{
    convergence_study, count_free_dofs, decay_exponent, energy_error_pi, energy_seminorm, inverse_lab_bubble, inverse_lab_gll,
    inverse_lab_hminus1, inverse_lab_triangle, inverse_lab_weighted, power_fit, stability_table, ConvergenceConfig,
    DegreePolicy, Method, Shape, SpectrumReport, StabilityOptions,
};
use hpvem::assemble::{assign_degrees, solve_poisson, DegreeRule};
use hpvem::mesh::{build_graded_mesh, MeshFamily};
use hpvem::vem_local::Stabilization;
use hpvem::Point;

type Check = Result<(bool, String), String>;

const SQRT2_M1: f64 = std::f64::consts::SQRT_2 - 1.0;
const SIGMAS: [(f64, &str); 3] = [(0.5, "1/2"), (SQRT2_M1, "sqrt2-1"), (SQRT2_M1 * SQRT2_M1, "(sqrt2-1)^2")];

/// Reference spectra: (p, square min, square max, decagon min, decagon max, hexagon min, hexagon max).
const REFERENCE: [(usize, [f64; 6]); 9] = [
    (2, [7.8559e-01, 1.0000e+00, 7.9262e-02, 5.5516e+00, 1.6168e-01, 1.1183e+00]),
    (3, [4.6667e-01, 1.0000e+00, 1.0306e-01, 8.6605e+00, 1.3342e-01, 1.4751e+00]),
    (4, [3.3195e-01, 1.0000e+00, 4.5039e-02, 1.0852e+01, 1.0321e-01, 1.6253e+00]),
    (5, [2.7547e-01, 1.0000e+00, 3.4944e-02, 1.0513e+01, 7.4247e-02, 1.8672e+00]),
    (6, [2.1557e-01, 1.0000e+00, 2.3463e-02, 1.1835e+01, 5.5556e-02, 1.6707e+00]),
    (7, [1.8994e-01, 1.0000e+00, 2.0730e-02, 9.7514e+00, 3.5664e-02, 1.9013e+00]),
    (8, [1.4136e-01, 1.0000e+00, 1.6122e-02, 1.0447e+01, 2.7559e-02, 1.8801e+00]),
    (9, [1.2446e-01, 1.0000e+00, 1.8555e-02, 7.9781e+00, 2.1313e-02, 1.8337e+00]),
    (10, [9.2933e-02, 1.0000e+00, 1.3736e-02, 3.9577e+01, 1.7991e-02, 5.6544e+00]),
];

fn main() {
    let mut errors = 0;
    let mut run = |label: &str, check: &dyn Fn() -> Check| {
        let t = Instant::now();
        let result = check();
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok((pass, detail)) => println!("{label}: {} ({secs:.1} s) {detail}", if pass { "PASS" } else { "FAIL" }),
            Err(e) => {
                errors += 1;
                println!("{label}: FAIL ({secs:.1} s) error: {e}");
            }
        }
    };
    run("criterion 1 patch test", &patch_test);
    let spectra = std::cell::OnceCell::new();
    let boundary = || stability_spectra(Stabilization::default());
    run("criterion 2 stability table", &|| table_check(spectra.get_or_init(boundary).as_ref().map_err(Clone::clone)?));
    run("criterion 2 supplementary (GLL boundary, weight sqrt2)", &|| table_check(&stability_spectra(Stabilization::table())?));
    run("criterion 3 decay law", &|| decay_check(spectra.get_or_init(boundary).as_ref().map_err(Clone::clone)?));
    run("criterion 4 exponential convergence", &exponential_convergence);
    run("criterion 5 dof growth", &dof_growth);
    run("criterion 6 fem/vem skeleton comparison", &fem_vem_comparison);
    run("criterion 7 inverse-estimate lab", &inverse_lab);
    run("criterion 8 determinism", &determinism);
    if errors > 0 {
        std::process::exit(1);
    }
}

fn patch_test() -> Check {
    let u = |x: Point| x.x * x.x - x.y * x.y;
    let grad = |x: Point| [2.0 * x.x, -2.0 * x.y];
    let mesh = build_graded_mesh(MeshFamily::GradedSquares, 2, 0.5).map_err(|e| e.to_string())?;
    let degrees = assign_degrees(&mesh, DegreeRule::Uniform(2)).map_err(|e| e.to_string())?;
    let (sys, sol) = solve_poisson(&mesh, &degrees, Stabilization::default(), |_| 0.0, u).map_err(|e| e.to_string())?;
    let err = energy_error_pi(&sys, &mesh, &sol.values, grad).map_err(|e| e.to_string())?;
    let rel = err / energy_seminorm(&mesh, 2, grad).map_err(|e| e.to_string())?;
    Ok((rel <= 1e-8, format!("relative energy error {rel:.2e} (tolerance 1e-8)")))
}

fn stability_spectra(stab: Stabilization) -> Result<Vec<SpectrumReport>, String> {
    let opts = StabilityOptions { stabilization: stab, ..Default::default() };
    let degrees: Vec<usize> = (2..=10).collect();
    let mut all = Vec::new();
    for shape in Shape::ALL {
        all.extend(stability_table(shape, &shape.polygon(), &degrees, &opts).map_err(|e| e.to_string())?);
    }
    Ok(all)
}

fn table_check(reports: &[SpectrumReport]) -> Check {
    let mut worst = [0.0f64; 6];
    let mut misses = [0usize; 3];
    let mut unconverged = 0;
    for r in reports {
        let (_, refs) = REFERENCE.iter().find(|(p, _)| *p == r.p).ok_or("degree outside the table")?;
        let col = Shape::ALL.iter().position(|&s| s == r.shape).unwrap();
        let tol = if r.shape == Shape::Square { 0.05 } else { 0.10 };
        let dev_min = (r.lambda_min / refs[2 * col] - 1.0).abs();
        let dev_max = (r.lambda_max / refs[2 * col + 1] - 1.0).abs();
        worst[2 * col] = worst[2 * col].max(dev_min);
        worst[2 * col + 1] = worst[2 * col + 1].max(dev_max);
        if dev_min > tol || dev_max > tol {
            misses[col] += 1;
        }
        if !r.converged {
            unconverged += 1;
        }
    }
    let pass = misses.iter().all(|&m| m == 0) && unconverged == 0;
    Ok((
        pass,
        format!(
            "rows off tolerance: square {}/9 (5%), decagon {}/9, hexagon {}/9 (10%); worst deviation min/max: \
             square {:.1}%/{:.1}%, decagon {:.1}%/{:.1}%, hexagon {:.1}%/{:.1}%; rows with oracle change >= 1%: {unconverged}",
            misses[0],
            misses[1],
            misses[2],
            100.0 * worst[0],
            100.0 * worst[1],
            100.0 * worst[2],
            100.0 * worst[3],
            100.0 * worst[4],
            100.0 * worst[5],
        ),
    ))
}

fn decay_check(reports: &[SpectrumReport]) -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for shape in Shape::ALL {
        let rows: Vec<SpectrumReport> = reports.iter().filter(|r| r.shape == shape).cloned().collect();
        let exponent = decay_exponent(&rows).ok_or("no fit")?;
        let floor = rows.iter().map(|r| r.lambda_min * (r.p as f64).powi(5)).fold(f64::INFINITY, f64::min);
        pass &= (-1.6..=-0.4).contains(&exponent) && floor > 0.0;
        parts.push(format!("{shape} exponent {exponent:.2}, min λ_min·p⁵ {floor:.3}"));
    }
    Ok((pass, format!("{} (range [-1.6, -0.4])", parts.join("; "))))
}

fn study(family: MeshFamily, sigma: f64, n_min: usize, n_max: usize, method: Method) -> ConvergenceConfig {
    ConvergenceConfig {
        family,
        sigma,
        degrees: DegreePolicy::Rule(DegreeRule::Layered(1.0)),
        stabilization: Stabilization::default(),
        n_min,
        n_max,
        method,
    }
}

fn exponential_convergence() -> Check {
    let mut pass = true;
    let mut worst_r2 = f64::INFINITY;
    let mut bad = Vec::new();
    let mut drop = 0.0;
    for family in [MeshFamily::GradedSquares, MeshFamily::LayerDecagons, MeshFamily::DecagonsCut] {
        for (sigma, name) in SIGMAS {
            let s = convergence_study(&study(family, sigma, 2, 8, Method::Vem)).map_err(|e| e.to_string())?;
            let fit = s.energy_fit.ok_or("no fit")?;
            worst_r2 = worst_r2.min(fit.r2);
            if !(fit.slope < 0.0 && fit.r2 >= 0.97) {
                pass = false;
                bad.push(format!("{family:?} σ={name} slope {:.3} R² {:.3}", fit.slope, fit.r2));
            }
            if family == MeshFamily::GradedSquares && sigma == 0.5 {
                let first = s.records.first().unwrap().err_energy;
                let last = s.records.last().unwrap().err_energy;
                drop = (first / last).log10();
            }
        }
    }
    pass &= drop >= 3.0;
    let fits = if bad.is_empty() { "all 9 fits slope < 0 and R² >= 0.97".to_string() } else { bad.join(", ") };
    Ok((pass, format!("{fits} (worst R² {worst_r2:.4}); family a σ=1/2 drop n=2..8: {drop:.2} orders (need 3)")))
}

fn dof_growth() -> Check {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for n in 4..=12 {
        let dofs = count_free_dofs(MeshFamily::GradedSquares, 0.5, n, DegreeRule::Layered(1.0)).map_err(|e| e.to_string())?;
        xs.push((n + 1) as f64);
        ys.push(dofs as f64);
    }
    let fit = power_fit(&xs, &ys).ok_or("no fit")?;
    Ok(((fit.slope - 3.0).abs() <= 0.3, format!("N ~ (n+1)^{:.2} over n=4..12 (need 3 ± 0.3)", fit.slope)))
}

fn fem_vem_comparison() -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    let runs = [
        (MeshFamily::TensorQuadsFem, Method::Fem),
        (MeshFamily::GradedSquares, Method::Vem),
        (MeshFamily::LayerDecagons, Method::Vem),
        (MeshFamily::DecagonsCut, Method::Vem),
    ];
    for (sigma, name) in [SIGMAS[0], SIGMAS[2]] {
        for (family, method) in runs {
            let s = convergence_study(&study(family, sigma, 2, 8, method)).map_err(|e| e.to_string())?;
            let fit = s.skeleton_fit.ok_or("no fit")?;
            let monotone = s.records.windows(2).all(|w| w[1].err_skeleton < w[0].err_skeleton);
            let ok = monotone && fit.r2 >= 0.95;
            pass &= ok;
            if !ok {
                parts.push(format!("{family:?} σ={name}: monotone {monotone}, R² {:.3}", fit.r2));
            }
        }
    }
    let detail = if parts.is_empty() { "all 8 skeleton curves monotone with R² >= 0.95".to_string() } else { parts.join("; ") };
    Ok((pass, detail))
}

fn inverse_lab() -> Check {
    let err = |e: hpvem::error::Error| e.to_string();
    let c0 = inverse_lab_weighted(0.0, 1.0, &[0]).map_err(err)?[0].constant;
    let w = inverse_lab_weighted(0.0, 1.0, &(2..=20).collect::<Vec<_>>()).map_err(err)?[0].fitted_exponent;
    // 3/2 up to rounding of the quadrature
    let ok_i = (w - 2.0).abs() <= 0.3 && (c0 - 1.5).abs() <= 1e-12;
    let gll = inverse_lab_gll(&(1..=20).collect::<Vec<_>>(), 500, 2024).map_err(err)?;
    let lower = gll.iter().map(|r| r.constant).fold(f64::INFINITY, f64::min);
    let ok_ii = gll.iter().all(|r| r.holds) && lower > 0.25;
    let tri = inverse_lab_triangle(&(0..=20).collect::<Vec<_>>()).map_err(err)?[0].fitted_exponent;
    let ok_iii = tri <= 2.05;
    let hm = inverse_lab_hminus1(&Shape::Square.polygon(), &(0..=10).collect::<Vec<_>>(), 4, 4).map_err(err)?[0].fitted_exponent;
    let ok_iv = hm <= 2.1;
    let bub = inverse_lab_bubble(&(0..=20).collect::<Vec<_>>()).map_err(err)?[0].fitted_exponent;
    let ok_v = bub <= 1.1;
    let mark = |b: bool| if b { "ok" } else { "FAIL" };
    Ok((
        ok_i && ok_ii && ok_iii && ok_iv && ok_v,
        format!(
            "(i) exponent {w:.2} over p=2..20 (need 2 ± 0.3), p=0 constant {c0:.15} (need 3/2) [{}]; (ii) worst lower constant {lower:.3} \
             (need > 0.25) [{}]; (iii) exponent {tri:.2} (need <= 2.05) [{}]; (iv) exponent {hm:.2} (need <= 2.1) [{}]; \
             (v) exponent {bub:.2} (need <= 1.1) [{}]",
            mark(ok_i),
            mark(ok_ii),
            mark(ok_iii),
            mark(ok_iv),
            mark(ok_v)
        ),
    ))
}

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hpvem")).current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
    match out.status.success() {
        true => Ok(()),
        false => Err(String::from_utf8_lossy(&out.stderr).into_owned()),
    }
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut same = true;
    let commands: [&[&str]; 2] = [
        &["convergence", "--family", "c", "--sigma", "sqrt2-1", "--nmax", "5"],
        &["inverse-lab", "--seed", "11", "--pmax", "12", "--samples", "100"],
    ];
    for (i, args) in commands.iter().enumerate() {
        let mut bodies = Vec::new();
        for (run, jobs) in ["1", "4"].iter().enumerate() {
            let name = format!("run{i}-{run}.csv");
            let mut full = vec!["--jobs", jobs];
            full.extend_from_slice(args);
            full.extend(["--out", &name]);
            cli(dir.path(), &full)?;
            let text = std::fs::read_to_string(dir.path().join(&name)).map_err(|e| e.to_string())?;
            bodies.push(text.lines().skip(1).collect::<Vec<_>>().join("\n"));
        }
        same &= bodies[0] == bodies[1] && !bodies[0].is_empty();
    }
    Ok((same, "convergence and inverse-lab CSV bodies compared across two runs (1 and 4 threads)".into()))
}
