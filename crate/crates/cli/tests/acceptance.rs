//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use htcp_core::classify::{
    check_p_pair, check_p_pair_via_left_inverse, check_r0_pair, check_r_pair, r0_residual, singular_direction,
    Certificate, Outcome,
};
use htcp_core::generate::{dominant_tensor, no_solution_example, odd_p_pair_example, r_pair_example, random_tensor};
use htcp_core::io::instance_to_string;
use htcp_core::newton::start_rng;
use htcp_core::oracle::oracle_check;
use htcp_core::solver::{scale_instance, scale_solution, solve_pattern_enumeration, SolveStatus};
use htcp_core::spectra::{b_eigen, degree_census_pair, degree_estimate_pair, degree_estimate_tcp, h_eigen, z_eigen};
use htcp_core::{HtcpInstance, Matrix, SolutionPair, SolverConfig, Tensor, Vector};

type Checked = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rel(a: &Vector, b: &Vector) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

fn htcp(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_htcp"))
        .args(args)
        .env_remove("HTCP_WORKERS")
        .output()
        .expect("binary runs")
}

fn write_instance(dir: &Path, name: &str, inst: &HtcpInstance) -> String {
    let path = dir.join(name);
    std::fs::write(&path, instance_to_string(inst)).unwrap();
    path.to_str().unwrap().to_string()
}

fn grid_holds(v: &htcp_core::classify::Verdict) -> bool {
    v.outcome == Outcome::HoldsWithCertificate && matches!(v.certificate, Some(Certificate::Grid { .. }))
}

fn odd_p_pair() -> Checked {
    let inst = odd_p_pair_example();
    let (a, b) = (inst.a(), inst.b());
    let cfg = SolverConfig::default();
    let v = check_p_pair(a, b, &cfg).map_err(|e| e.to_string())?;
    check(grid_holds(&v), format!("check_p_pair gave {:?}", v.outcome))?;
    let eye = Tensor::from_matrix(&Matrix::identity(2, 2)).unwrap();
    let c = a.shao_product(&eye).unwrap().add(&b.shao_product(&eye).unwrap()).unwrap();
    check(c.is_zero(), "A·I + B·I is not the zero tensor")?;
    let (u, res) = singular_direction(&c, &cfg).ok_or("no singular direction found")?;
    check(res <= cfg.tol_residual && (u.norm() - 1.0).abs() < 1e-9, "singular direction not verified")?;
    Ok(format!("P pair holds by grid; A·I + B·I = 0 singular along u = {:?}", u.as_slice()))
}

fn no_solution(dir: &Path) -> Checked {
    let inst = no_solution_example();
    let cfg = SolverConfig::default();
    let v = check_p_pair(inst.a(), inst.b(), &cfg).map_err(|e| e.to_string())?;
    check(grid_holds(&v), format!("check_p_pair gave {:?}", v.outcome))?;
    let rep = solve_pattern_enumeration(&inst, &cfg).map_err(|e| e.to_string())?;
    check(rep.status == SolveStatus::ProvenEmpty, format!("enumeration status {:?}", rep.status))?;
    let path = write_instance(dir, "no-solution.json", &inst);
    let code = htcp(&["solve", &path, "--method", "enumerate"]).status.code();
    check(code == Some(3), format!("htcp solve exited {code:?}"))?;
    Ok("P pair holds by grid; enumeration proven-empty; htcp solve exit 3".into())
}

fn r_pair() -> Checked {
    let inst = r_pair_example();
    let cfg = SolverConfig::default();
    let v = check_r_pair(inst.a(), inst.b(), inst.q(), &cfg).map_err(|e| e.to_string())?;
    check(v.holds(), format!("check_r_pair gave {:?} at {:?}", v.outcome, v.failed_clause))?;
    let Some(Certificate::Clauses { clauses }) = &v.certificate else {
        return Err("no clause certificate".into());
    };
    check(clauses.iter().all(|c| c.passed), "a clause did not pass")?;
    let sols = solve_pattern_enumeration(&inst, &cfg).map_err(|e| e.to_string())?.solutions;
    check(sols.len() == 1, format!("{} solutions", sols.len()))?;
    let e = Vector::from_element(2, 1.0);
    let s = &sols[0];
    check((&s.x - &e).amax() <= 1e-9 && s.y.amax() <= 1e-9, "solution is not (e, 0)")?;
    check((&s.x + &s.y).iter().all(|v| *v > 0.0), "x + y not positive")?;
    let names: Vec<&str> = clauses.iter().map(|c| c.clause.as_str()).collect();
    Ok(format!("unique solution (e, 0); clauses {names:?} all certified"))
}

fn oracle() -> Checked {
    let s = oracle_check(200, 3, &[2, 3, 4], &SolverConfig::default()).map_err(|e| e.to_string())?;
    check(s.passed(), format!("{} failing instances", s.failures.len()))?;
    check(s.hlcp_checked > 0 && s.hlcp_agreed == s.hlcp_checked, "HLCP disagreement")?;
    Ok(format!(
        "{}/{} solutions contained over {} instances; m = 2 HLCP agreement {}/{}",
        s.solutions_contained, s.solutions_checked, s.count, s.hlcp_agreed, s.hlcp_checked
    ))
}

fn int_tensor(seed: u64, m: usize, n: usize) -> Tensor {
    let mut rng = start_rng(seed, 0);
    let t = random_tensor(&mut rng, m, n).unwrap();
    Tensor::new(m, n, t.entries().iter().map(|v| (v * 3.0).round()).collect()).unwrap()
}

fn kernels() -> Checked {
    let h = 1e-6;
    let (mut jac_err, mut e1, mut e2) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..100u64 {
        let mut rng = start_rng(500, k);
        let (m, n) = (2 + k as usize % 3, 1 + (k as usize / 3) % 3);
        let t = random_tensor(&mut rng, m, n).unwrap();
        let x = htcp_core::generate::random_vector(&mut rng, n) * 2.0;
        let jac = t.jacobian(&x).unwrap();
        let mut fd = Matrix::zeros(n, n);
        for j in 0..n {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            fd.set_column(j, &((t.apply_power(&xp).unwrap() - t.apply_power(&xm).unwrap()) / (2.0 * h)));
        }
        jac_err = jac_err.max((&jac - &fd).amax() / jac.amax().max(1.0));
        let tx = t.apply_power(&x).unwrap();
        let s = t.partial_symmetrize().unwrap();
        e1 = e1.max(rel(&s.apply_power(&x).unwrap(), &tx));
        e2 = e2.max(rel(&(s.contract_to_matrix(&x).unwrap() * &x), &tx));
    }
    check(jac_err <= 1e-5, format!("jacobian error {jac_err:e}"))?;
    check(e1 <= 1e-12 && e2 <= 1e-12, format!("identity errors {e1:e}, {e2:e}"))?;
    let mut axioms = 0;
    for k in 0..30u64 {
        let n = 1 + k as usize % 3;
        let (m, j) = (2 + k as usize % 2, 2 + (k as usize / 2) % 2);
        let a = int_tensor(600 + k, m, n);
        let a2 = int_tensor(700 + k, m, n);
        let b = int_tensor(800 + k, j, n);
        let e = int_tensor(900 + k, 2, n);
        let eye = Tensor::from_matrix(&Matrix::identity(n, n)).unwrap();
        let mm = int_tensor(1000 + k, 2, n);
        check(a.shao_product(&eye).unwrap() == a && eye.shao_product(&a).unwrap() == a, "identity axiom")?;
        let lhs = mm.shao_product(&a.add(&a2).unwrap()).unwrap();
        let rhs = mm.shao_product(&a).unwrap().add(&mm.shao_product(&a2).unwrap()).unwrap();
        check(lhs == rhs, "distributivity axiom")?;
        let left = a.shao_product(&b).unwrap().shao_product(&e).unwrap();
        let right = a.shao_product(&b.shao_product(&e).unwrap()).unwrap();
        check(left == right, "associativity axiom")?;
        axioms += 3;
    }
    Ok(format!(
        "jacobian max rel err {jac_err:.1e}; symmetrization {e1:.1e}; contraction {e2:.1e}; {axioms} exact Shao checks"
    ))
}

fn homogeneity() -> Checked {
    let mut worst = 0.0f64;
    for k in 0..100u64 {
        let mut rng = start_rng(1100, k);
        let (m, n) = (2 + k as usize % 3, 1 + (k as usize / 3) % 3);
        let a = random_tensor(&mut rng, m, n).unwrap();
        let b = random_tensor(&mut rng, m, n).unwrap();
        let w = htcp_core::generate::random_vector(&mut rng, n);
        let x = w.map(|v| v.max(0.0));
        let y = w.map(|v| (-v).max(0.0));
        let q = a.apply_power(&x).unwrap() - b.apply_power(&y).unwrap();
        let inst = HtcpInstance::new(a, b, q).unwrap();
        let pair = SolutionPair::evaluate(&inst, x, y).unwrap();
        for mu in [0.5, 2.0, 10.0] {
            let scaled = scale_instance(&inst, mu).unwrap();
            let s = scale_solution(&pair, mu, m).unwrap();
            let re = SolutionPair::evaluate(&scaled, s.x, s.y).unwrap();
            worst = worst.max(re.residual() / scaled.q().amax().max(1.0));
        }
    }
    check(worst <= 1e-10, format!("scaled residual {worst:e}"))?;

    // A x^3 = (x1^3 - x2^3, x2^3 - x1^3) vanishes along x1 = x2.
    let a = Tensor::zeros(4, 2)
        .and_then(|t| t.with_entry(&[0, 0, 0, 0], 1.0))
        .and_then(|t| t.with_entry(&[0, 1, 1, 1], -1.0))
        .and_then(|t| t.with_entry(&[1, 1, 1, 1], 1.0))
        .and_then(|t| t.with_entry(&[1, 0, 0, 0], -1.0))
        .unwrap();
    let b = Tensor::identity(4, 2).unwrap();
    let cfg = SolverConfig::default();
    let v = check_r0_pair(&a, &b, &cfg).map_err(|e| e.to_string())?;
    check(v.is_refuted(), "R0 not refuted")?;
    let (x, y) = (v.vector("x").unwrap(), v.vector("y").unwrap());
    let mut ray = 0.0f64;
    for mu in [1.0, 2.0, 4.0, 8.0] {
        let r = r0_residual(&a, &b, &(&x * mu), &(&y * mu)).unwrap() / mu.powi(3);
        ray = ray.max(r);
    }
    check(ray <= cfg.tol_residual, format!("ray residual {ray:e}"))?;
    Ok(format!("scaling residual {worst:.1e} over 300 checks; R0 ray residual / μ^3 ≤ {ray:.1e} for μ in 1,2,4,8"))
}

fn degree() -> Checked {
    let cfg = SolverConfig::default();
    let i = Tensor::identity(4, 2).unwrap();
    let pi = degree_estimate_pair(&i, &i, None, &cfg).map_err(|e| e.to_string())?.value;
    let ti = degree_estimate_tcp(&i, &cfg).map_err(|e| e.to_string())?.value;
    check(pi == 1 && ti == 1, format!("B = I: pair {pi}, tcp {ti}"))?;
    let mut values = Vec::new();
    for k in 0..20u64 {
        let mut rng = start_rng(1200, k);
        let m = if k % 2 == 0 { 2 } else { 4 };
        let mut b = dominant_tensor(&mut rng, m, 2).unwrap();
        if k % 4 >= 2 {
            b = b.scale(-1.0);
        }
        let id = Tensor::identity(m, 2).unwrap();
        let p = degree_estimate_pair(&id, &b, None, &cfg).map_err(|e| format!("tensor {k}: {e}"))?.value;
        let t = degree_estimate_tcp(&b, &cfg).map_err(|e| format!("tensor {k}: {e}"))?.value;
        check(p == t, format!("tensor {k}: pair {p} vs tcp {t}"))?;
        let other = SolverConfig { rng_seed: 1, ..Default::default() };
        let c0 = degree_census_pair(&id, &b, &cfg).map_err(|e| e.to_string())?.value;
        let c1 = degree_census_pair(&id, &b, &other).map_err(|e| e.to_string())?.value;
        check(c0 == c1, format!("tensor {k}: census {c0} vs {c1} under resampling"))?;
        values.push(p);
    }
    Ok(format!("B = I: both 1; 20 random n = 2 tensors agree (values {values:?}); resampling stable"))
}

fn coherence() -> Checked {
    let cfg = SolverConfig { multistart_count: 32, ..Default::default() };
    let (mut r0_refuted, mut left_inverse, mut screened) = (0, 0, 0);
    for k in 0..50u64 {
        let mut rng = start_rng(1300, k);
        let (m, n) = (if k % 2 == 0 { 2 } else { 4 }, 1 + (k as usize / 2) % 2);
        // Cycle of five: left-invertible A against dominant and uniform B,
        // dominant pairs, uniform pairs, and pairs with A e1^{m-1} = 0.
        let a = match k % 5 {
            0 | 1 => {
                let mut nm = Matrix::from_fn(n, n, |_, _| htcp_core::generate::random_vector(&mut rng, 1)[0]);
                nm += Matrix::identity(n, n) * 2.0;
                Tensor::identity(m, n).unwrap().left_mul_matrix(&nm).unwrap()
            }
            2 => dominant_tensor(&mut rng, m, n).unwrap(),
            3 => random_tensor(&mut rng, m, n).unwrap(),
            _ => {
                let mut t = random_tensor(&mut rng, m, n).unwrap();
                for i in 0..n {
                    let mut idx = vec![0; m];
                    idx[0] = i;
                    t = t.with_entry(&idx, 0.0).unwrap();
                }
                t
            }
        };
        let b = if k % 5 == 0 || k % 5 == 2 { dominant_tensor(&mut rng, m, n) } else { random_tensor(&mut rng, m, n) }.unwrap();
        let p = check_p_pair(&a, &b, &cfg).map_err(|e| e.to_string())?;
        if check_r0_pair(&a, &b, &cfg).map_err(|e| e.to_string())?.is_refuted() {
            r0_refuted += 1;
            check(p.is_refuted(), format!("pair {k}: R0 refuted but P not"))?;
        }
        if let Ok(via) = check_p_pair_via_left_inverse(&a, &b, &cfg) {
            left_inverse += 1;
            let clash = (p.is_refuted() && via.holds()) || (p.holds() && via.is_refuted());
            let both = p.is_conclusive() && via.is_conclusive();
            check(!clash && (!both || p.outcome == via.outcome), format!("pair {k}: left-inverse disagreement"))?;
        }
        if !p.is_refuted() {
            screened += 1;
            for t in [&a, &b] {
                let h = h_eigen(t, &cfg).map_err(|e| e.to_string())?;
                let z = z_eigen(t, &cfg).map_err(|e| e.to_string())?;
                let zero = h.lambdas().iter().chain(z.lambdas().iter()).any(|l| l.abs() <= 1e-6);
                check(!zero, format!("pair {k}: zero eigenvalue under a P verdict"))?;
            }
            let be = b_eigen(&a, &b, &cfg).map_err(|e| e.to_string())?;
            check(be.lambdas().iter().all(|l| *l > -1e-6), format!("pair {k}: negative B-eigenvalue"))?;
        }
    }
    Ok(format!(
        "50 pairs: {r0_refuted} R0 refutations all P-refuted; {left_inverse} left-inverse comparisons; {screened} eigen screens clean"
    ))
}

fn determinism(dir: &Path) -> Checked {
    let even = write_instance(dir, "even.json", &r_pair_example());
    let odd = write_instance(dir, "odd.json", &odd_p_pair_example());
    let q = dir.join("q.json");
    std::fs::write(&q, r#"{"dim": 2, "values": [1, 1]}"#).unwrap();
    let q = q.to_str().unwrap().to_string();
    let runs: Vec<Vec<&str>> = vec![
        vec!["solve", &even],
        vec!["solve", &odd, "--method", "newton"],
        vec!["classify", &even, "--property", "r0"],
        vec!["classify", &even, "--property", "r", "--q", &q],
        vec!["classify", &odd, "--property", "p"],
        vec!["classify", &odd, "--property", "strong-p"],
        vec!["eigen", &even, "--kind", "h"],
        vec!["eigen", &even, "--kind", "b"],
        vec!["degree", &even],
        vec!["degree", &even, "--tcp"],
        vec!["oracle-check", "--count", "9", "--dims", "2"],
    ];
    for args in &runs {
        let outs: Vec<_> = ["1", "4"]
            .iter()
            .map(|w| {
                let mut a = args.clone();
                a.extend(["--workers", w, "--seed", "17"]);
                htcp(&a)
            })
            .collect();
        check(outs[0].status.code() == outs[1].status.code(), format!("{args:?}: exit codes differ"))?;
        check(outs[0].stdout == outs[1].stdout, format!("{args:?}: reports differ"))?;
    }
    let gen: Vec<Vec<u8>> = ["1", "4"]
        .iter()
        .map(|w| {
            let out = dir.join(format!("gen-{w}"));
            let args = ["gen", "--family", "random", "--count", "3", "--seed", "17", "--workers", w];
            let mut args = args.to_vec();
            args.extend(["--out", out.to_str().unwrap()]);
            htcp(&args);
            std::fs::read(out.join("random-0002.json")).unwrap_or_default()
        })
        .collect();
    check(!gen[0].is_empty() && gen[0] == gen[1], "gen output differs")?;
    Ok(format!("{} commands plus gen identical under 1 and 4 workers", runs.len()))
}

type Criterion<'a> = (&'a str, Option<Duration>, Box<dyn Fn() -> Checked + 'a>);

fn main() {
    let dir = tempfile::TempDir::new().unwrap();
    let criteria: Vec<Criterion> = vec![
        ("odd-order P pair example", Some(Duration::from_secs(10)), Box::new(odd_p_pair)),
        ("no-solution example", Some(Duration::from_secs(5)), Box::new(|| no_solution(dir.path()))),
        ("R pair example", Some(Duration::from_secs(10)), Box::new(r_pair)),
        ("oracle equivalence", Some(Duration::from_secs(300)), Box::new(oracle)),
        ("numerical kernels", None, Box::new(kernels)),
        ("homogeneity and boundedness", None, Box::new(homogeneity)),
        ("degree consistency", Some(Duration::from_secs(120)), Box::new(degree)),
        ("cross-classifier coherence", None, Box::new(coherence)),
        ("determinism across worker counts", None, Box::new(|| determinism(dir.path()))),
    ];
    let mut failed = 0;
    for (k, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = f();
        let took = start.elapsed();
        let result = match (result, limit) {
            (Ok(_), Some(l)) if took > *l => Err(format!("took {took:.1?}, limit {l:?}")),
            (r, _) => r,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        failed += result.is_err() as usize;
        println!("criterion {}: {tag} {name} ({took:.2?}): {detail}", k + 1);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
