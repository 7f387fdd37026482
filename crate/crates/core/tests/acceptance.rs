//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! failure status if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use biharmonic_ieti::assembly::{assemble_tensor, classify_dofs, interpolate, AssemblyOptions};
use biharmonic_ieti::cli::{convergence_study, table_study, RunConfig, TableStudy};
use biharmonic_ieti::extension_lab::{
    max_log_ratio_slope, trace_identity_residual, verify_bound, BucketPlan, TraceSpace,
};
use biharmonic_ieti::geometry::{builtin_domain, two_squares, DomainName, MultiPatch, Point};
use biharmonic_ieti::ieti::{
    build_jump_and_primal, monolithic_solve, solve_discretization, Discretization, IetiOptions, Preconditioner,
};
use biharmonic_ieti::linalg::{dense_kappa, PcgOptions};
use biharmonic_ieti::splines::{KnotVector, TensorBasis2D};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Generic load without symmetry, so every eigenvector of F appears in the Krylov space.
fn generic_load([x, y]: Point) -> f64 {
    (1.3 * x + 0.7).exp() * (1.0 + y * y * y) + (5.0 * x * y).sin()
}

struct Fixture {
    /// `(r, p) -> (kappa, it)`.
    cells: Vec<(u32, usize, f64, usize)>,
}

impl Fixture {
    fn load(name: &str) -> Self {
        let path = format!("{}/tests/fixtures/{name}.csv", env!("CARGO_MANIFEST_DIR"));
        let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let mut cells = Vec::new();
        for line in lines {
            let v: Vec<&str> = line.split(',').collect();
            let r: u32 = v[0].parse().unwrap();
            for c in (1..header.len()).step_by(2) {
                let p: usize = header[c].trim_start_matches('p').split('_').next().unwrap().parse().unwrap();
                cells.push((r, p, v[c].parse().unwrap(), v[c + 1].parse().unwrap()));
            }
        }
        Self { cells }
    }

    fn get(&self, p: usize, r: u32) -> (f64, usize) {
        let c = self.cells.iter().find(|c| c.0 == r && c.1 == p).expect("fixture cell");
        (c.2, c.3)
    }
}

fn annulus_table(precond: Preconditioner, degrees: &[usize], refinements: &[u32]) -> TableStudy {
    let base = RunConfig { domain: DomainName::QuarterAnnulus, splits: 4, precond, ..RunConfig::default() };
    table_study(&base, degrees, refinements, 0)
}

fn criterion_1() -> Outcome {
    let cases: [(&str, MultiPatch); 4] = [
        ("two_squares", two_squares()),
        ("annulus16", builtin_domain("quarter_annulus", 4).unwrap()),
        ("annulus64", builtin_domain("quarter_annulus", 8).unwrap()),
        ("lamella32", builtin_domain("lamella", 2).unwrap()),
    ];
    let mut parts = Vec::new();
    for (name, mp) in cases {
        let dofs = classify_dofs(&mp, &vec![TensorBasis2D::uniform(2, 3).unwrap(); mp.num_patches()]).unwrap();
        let (b, _) = build_jump_and_primal(&dofs).unwrap();
        let g = b.gram();
        let n = b.n_lambda;
        let exact = (0..n).all(|i| (0..n).all(|j| g[(i, j)] == if i == j { 2.0 } else { 0.0 }));
        let integral = b.patches.iter().all(|m| (0..m.nrows()).all(|i| m.row(i).1.iter().all(|v| v.abs() == 1.0)));
        if !(exact && integral) {
            return Err(format!("{name}: B Bᵀ != 2I (N_λ={n})"));
        }
        parts.push(format!("{name} N_λ={n}"));
    }
    Ok(parts.join(", "))
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for d in DomainName::ALL {
        let mp = builtin_domain(d.as_str(), d.default_splits()).unwrap();
        let cfg = RunConfig { domain: d, ..RunConfig::default() };
        let source = cfg.source();
        for p in [2, 3] {
            for r in [2, 3] {
                let t = Instant::now();
                let disc = Discretization::new(&mp, p, r, &source, &AssemblyOptions::default()).unwrap();
                let opts = IetiOptions {
                    pcg: PcgOptions { tol: 1e-13, max_iter: 1000, ..PcgOptions::default() },
                    ..IetiOptions::default()
                };
                let sol = solve_discretization(&disc, &opts).unwrap();
                let mono = monolithic_solve(&disc).unwrap();
                let (mut num, mut den) = (0.0, 0.0);
                for (a, b) in sol.coeffs.iter().flatten().zip(mono.iter().flatten()) {
                    num += (a - b) * (a - b);
                    den += b * b;
                }
                let rel = (num / den).sqrt();
                worst = worst.max(rel);
                slowest = slowest.max(t.elapsed().as_secs_f64());
                if !(rel <= 1e-8) {
                    return Err(format!("{d} p={p} r={r}: relative difference {rel:.2e}"));
                }
            }
        }
    }
    check(slowest <= 60.0, format!("max relative ℓ² difference {worst:.2e}, slowest case {slowest:.2}s"))
}

fn criterion_3() -> Outcome {
    let mp = builtin_domain("quarter_annulus", 4).unwrap();
    let k = (0..mp.num_patches())
        .find(|&k| biharmonic_ieti::geometry::Side::ALL.iter().all(|&s| !mp.is_boundary(k, s)))
        .expect("interior patch");
    let g = &mp.patches[k];
    let mut details = Vec::new();
    for (p, r) in [(2, 2), (3, 2), (2, 3)] {
        let tb = TensorBasis2D::uniform(p, r).unwrap();
        let (a, _) = assemble_tensor(g, &tb, None, &AssemblyOptions::default()).unwrap();
        let eig = SymmetricEigen::new(a.to_dense());
        let max = eig.eigenvalues.amax();
        let null: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] < 1e-9 * max).collect();
        if null.len() != 3 {
            return Err(format!("p={p} r={r}: {} near-zero eigenvalues", null.len()));
        }
        let basis = DMatrix::from_columns(&null.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
        let affine: [&(dyn Fn(Point) -> [f64; 6] + Sync); 3] = [
            &|_| [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            &|[x, _]| [x, 1.0, 0.0, 0.0, 0.0, 0.0],
            &|[_, y]| [y, 0.0, 1.0, 0.0, 0.0, 0.0],
        ];
        let mut worst: f64 = 0.0;
        for f in affine {
            let c = nalgebra::DVector::from_vec(interpolate(g, &tb, f).unwrap());
            let proj = &basis * (basis.transpose() * &c);
            worst = worst.max((&c - proj).norm() / c.norm());
        }
        if !(worst <= 1e-8) {
            return Err(format!("p={p} r={r}: affine functions leave the kernel by {worst:.2e}"));
        }
        details.push(format!("p={p} r={r} residual {worst:.1e}"));
    }
    Ok(format!("patch {k}: {}", details.join(", ")))
}

fn criterion_4(table: &TableStudy) -> Outcome {
    let fx = Fixture::load("table1_annulus16_scaled");
    let mut ok = true;
    let mut cells = Vec::new();
    for r in 3..=5 {
        for p in 2..=4 {
            let (k_ref, it_ref) = fx.get(p, r);
            let Some(res) = table.cell(p, r) else {
                ok = false;
                cells.push(format!("p{p}r{r}: error"));
                continue;
            };
            let dk = (res.kappa - k_ref) / k_ref;
            let di = (res.iterations as f64 - it_ref as f64) / it_ref as f64;
            let good = res.converged && dk.abs() <= 0.35 && di.abs() <= 0.30;
            ok &= good;
            cells.push(format!(
                "p{p}r{r}: κ {:.2}/{k_ref} it {}/{it_ref}{}",
                res.kappa,
                res.iterations,
                if good { "" } else { " ✗" }
            ));
        }
    }
    check(ok, cells.join("; "))
}

fn criterion_5(scaled: &TableStudy, modified: &TableStudy) -> Outcome {
    let mut ok = true;
    let mut cells = Vec::new();
    for r in 3..=5 {
        for p in 2..=4 {
            match (scaled.cell(p, r), modified.cell(p, r)) {
                (Some(s), Some(m)) => {
                    let good = m.converged && s.converged && m.iterations < s.iterations;
                    ok &= good;
                    cells.push(format!("p{p}r{r}: {}<{}{}", m.iterations, s.iterations, if good { "" } else { " ✗" }));
                }
                _ => {
                    ok = false;
                    cells.push(format!("p{p}r{r}: error"));
                }
            }
        }
    }
    check(ok, cells.join("; "))
}

fn criterion_6(table: &TableStudy) -> Outcome {
    let kappas: Vec<f64> = (3..=6).map(|r| table.cell(2, r).map_or(f64::NAN, |c| c.kappa)).collect();
    let ratios: Vec<f64> = kappas.windows(2).map(|w| w[1] / w[0]).collect();
    let ok = ratios.iter().all(|&q| (1.05..=2.2).contains(&q));
    check(
        ok,
        format!(
            "κ = {}; ratios = {}",
            kappas.iter().map(|k| format!("{k:.2}")).collect::<Vec<_>>().join(", "),
            ratios.iter().map(|k| format!("{k:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let base = RunConfig { domain: DomainName::Lamella, splits: 2, ..RunConfig::default() };
    let t = table_study(&base, &[2], &[3, 4, 5, 6], 0);
    let kappas: Vec<f64> = (3..=6).map(|r| t.cell(2, r).map_or(f64::NAN, |c| c.kappa)).collect();
    let monotone = kappas.windows(2).all(|w| w[1] > w[0]);
    let growth = kappas[3] / kappas[0];
    check(
        monotone && (2.5..=8.0).contains(&growth),
        format!(
            "κ = {}; growth r3→r6 {growth:.2} (window 2.5–8)",
            kappas.iter().map(|k| format!("{k:.2}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn criterion_8() -> Outcome {
    let base = RunConfig { domain: DomainName::UnitSquare, splits: 2, ..RunConfig::default() };
    let mut ok = true;
    let mut parts = Vec::new();
    for p in 2..=4 {
        let rows = convergence_study(&base, p, &[5, 6]).map_err(|e| e.to_string())?;
        let rate = rows[1].rate.unwrap_or(f64::NAN);
        let good = rows.iter().all(|r| r.converged) && rate >= p as f64 - 1.5;
        ok &= good;
        parts.push(format!("p={p}: rate {rate:.3} (≥ {:.1})", p as f64 - 1.5));
    }
    check(ok, parts.join("; "))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_trace: f64 = 0.0;
    for p in 2..=4 {
        for r in 3..=6 {
            let kv = KnotVector::uniform(p, r);
            let space = TraceSpace::new(&kv).map_err(|e| e.to_string())?;
            let plan = BucketPlan::new(&kv, &space.lambdas()).map_err(|e| e.to_string())?;
            if !plan.is_partition(space.dim()) || !plan.spacing_holds() {
                return Err(format!("p={p} r={r}: bucket plan invalid"));
            }
            for alpha in [0, 1] {
                let w: Vec<f64> = (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                worst_trace = worst_trace.max(trace_identity_residual(&space, &plan, &w, alpha, 50));
            }
        }
    }
    let mut max_ratio: f64 = 0.0;
    let mut slope = f64::NEG_INFINITY;
    for alpha in [0, 1] {
        let rows = verify_bound(alpha, &[2, 3, 4], &[3, 4, 5, 6], 30, 2024).map_err(|e| e.to_string())?;
        max_ratio = rows.iter().map(|b| b.max_ratio).fold(max_ratio, f64::max);
        slope = slope.max(max_log_ratio_slope(&rows));
    }
    check(
        worst_trace <= 1e-10 && max_ratio <= 100.0 && slope <= 0.2,
        format!("trace residual {worst_trace:.1e}, max ratio {max_ratio:.2}, log-ratio slope {slope:.3}"),
    )
}

fn criterion_10() -> Outcome {
    let mp = two_squares();
    let mut parts = Vec::new();
    for (p, r) in [(2, 3), (3, 4), (2, 5)] {
        let disc = Discretization::new(&mp, p, r, &generic_load, &AssemblyOptions::default()).unwrap();
        let ops = disc.operators().unwrap();
        let n = ops.n_lambda();
        assert!(n <= 200);
        for precond in [Preconditioner::Scaled, Preconditioner::Modified] {
            let opts = IetiOptions {
                precond,
                pcg: PcgOptions { tol: 1e-12, max_iter: 1000, ..PcgOptions::default() },
                ..IetiOptions::default()
            };
            let sol = solve_discretization(&disc, &opts).unwrap();
            let m = match precond {
                Preconditioner::Scaled => ops.scaled_dirichlet(&disc.dofs, opts.scaling).unwrap(),
                _ => ops.modified_dirichlet(&disc.dofs).unwrap(),
            };
            let f_dense = ops.dense(|x| ops.apply_f(x));
            let m_dense = ops.dense(|x| m.apply(x));
            let exact = dense_kappa(&f_dense, &m_dense).unwrap();
            let est = sol.report.kappa_estimate;
            let rel = (est - exact).abs() / exact;
            if !(rel <= 0.05) {
                return Err(format!("p={p} r={r} {}: Lanczos {est:.4} vs dense {exact:.4}", precond.as_str()));
            }
            parts.push(format!("N_λ={n} {} {est:.3}/{exact:.3}", precond.as_str()));
        }
    }
    Ok(parts.join("; "))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let scaled = annulus_table(Preconditioner::Scaled, &[2, 3, 4], &[3, 4, 5]);
    let modified = annulus_table(Preconditioner::Modified, &[2, 3, 4], &[3, 4, 5]);
    let growth = annulus_table(Preconditioner::Scaled, &[2], &[3, 4, 5, 6]);

    let results: Vec<(&str, Outcome)> = vec![
        ("1 jump gram is 2I", criterion_1()),
        ("2 IETI equals monolithic", criterion_2()),
        ("3 floating patch kernel", criterion_3()),
        ("4 annulus-16 reference table", criterion_4(&scaled)),
        ("5 modified beats scaled", criterion_5(&scaled, &modified)),
        ("6 annulus growth law", criterion_6(&growth)),
        ("7 lamella trend", criterion_7()),
        ("8 H2 convergence rate", criterion_8()),
        ("9 extension lab", criterion_9()),
        ("10 Lanczos vs dense kappa", criterion_10()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(d) => println!("PASS criterion {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {name}: {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed in {:.1}s", results.len() - failed, start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
