use brwdim::genfun::{Analyzer, SolverConfig};
use brwdim::group::{FactorGroup, FreeProduct};
use brwdim::oracle::PathOracle;

fn z3z2() -> FreeProduct {
    let f1 = FactorGroup::cyclic(3, &[(1, 0.5), (2, 0.5)]).unwrap();
    let f2 = FactorGroup::cyclic(2, &[(1, 1.0)]).unwrap();
    FreeProduct::new(vec![f1, f2], vec![0.5, 0.5], 0.5).unwrap()
}

#[test]
fn probe() {
    let spec = z3z2();
    let an = Analyzer::new(&spec, SolverConfig::default());

    let t0 = std::time::Instant::now();
    let xi1 = an.xi_solve(1.0).unwrap();
    println!("xi(1) = {:?} iters={} res={:.2e} t={:?}", xi1.xi, xi1.iterations, xi1.residual, t0.elapsed());

    // oracle comparison
    let t0 = std::time::Instant::now();
    let oracle = PathOracle::new(&spec, Some(32));
    println!("oracle states: {} build {:?}", oracle.state_count(), t0.elapsed());
    let t0 = std::time::Instant::now();
    for i in 0..2 {
        let tab = oracle.first_passage_set_series(i, 200);
        println!("factor {i}: oracle U(e,G_i|1) partial = {:.12}, xi = {:.12}, gap = {:.3e}",
            tab.partial_sum(1.0), xi1.xi[i], xi1.xi[i] - tab.partial_sum(1.0));
    }
    println!("passage t={:?}", t0.elapsed());

    // R
    let t0 = std::time::Instant::now();
    let r = an.radius().unwrap();
    println!("R = {:.12} bracket=({:.12},{:.12}) undecided={} t={:?}", r.value, r.lo, r.hi, r.undecided, t0.elapsed());

    // green identity on a small grid
    for z in [1.0, 1.005, an.resolvable_edge().unwrap()] {
        let xi = an.xi_converged(z).unwrap();
        let gaps = an.green_identity_gaps(&xi).unwrap();
        let g = an.green_ee(&xi).unwrap();
        println!("z={z:.6}: G={g:.9} gaps={gaps:?} xi={:?} iters={}", xi.xi, xi.iterations);
    }

    // z*_S
    let zs = an.z_star_s().unwrap();
    println!("z*_S = {:.15} (expect {:.15}) residual={:.2e}", zs.value, 0.5f64.sqrt(), zs.residual);

    // z* at several lambda
    for lam in [1.0, 1.005, 1.01, an.resolvable_edge().unwrap()] {
        let z = an.z_star(lam).unwrap();
        let phi = (z.value.ln() / 0.5f64.ln()).max(0.0);
        println!("lambda={lam:.8}: z*={:.12} phi={phi:.12} residual={:.2e} xi={:?}", z.value, z.residual, z.xi.xi);
    }

    // f_word vs oracle at 1.01
    let xi = an.xi_converged(1.01).unwrap();
    let ball = spec.ball_enumerate(3).unwrap();
    let words: Vec<_> = ball.iter().filter(|w| !w.is_identity()).cloned().collect();
    let t0 = std::time::Instant::now();
    let series = oracle.first_visit_series_batch(&words, 200).unwrap();
    println!("batch t={:?} for {} words", t0.elapsed(), words.len());
    let mut worst: f64 = 0.0;
    for (w, s) in words.iter().zip(&series) {
        let analytic = an.f_word(&xi, w).unwrap();
        let lower = s.partial_sum(1.01);
        let gap = analytic - lower;
        worst = worst.max(gap.abs());
        if gap < -1e-12 { println!("NOT A LOWER BOUND: {w} gap={gap:.3e}"); }
    }
    println!("worst |gap| over l<=3 words at lambda=1.01, N=200: {worst:.3e}");

    // H_m coefficients vs direct ball sums
    let hm = an.h_coefficients(&xi, 8).unwrap();
    let ball8 = spec.ball_enumerate(8).unwrap();
    let mut direct = vec![0.0; 9];
    for w in &ball8 {
        direct[spec.word_length(w) as usize] += an.f_word(&xi, w).unwrap();
    }
    println!("H_m rec:    {:?}", &hm[..6]);
    println!("H_m direct: {:?}", &direct[..6]);

    // ladder spec
    let lad = FreeProduct::new(
        vec![FactorGroup::ladder(32).unwrap(), FactorGroup::ladder(32).unwrap()],
        vec![0.5, 0.5], 0.5).unwrap();
    let an2 = Analyzer::new(&lad, SolverConfig::default());
    let zs2 = an2.z_star_s().unwrap();
    println!("ladder z*_S = {:.15} expect {:.15}", zs2.value, 5f64.sqrt() - 2.0);
    let t0 = std::time::Instant::now();
    let z1 = an2.z_star(1.0).unwrap();
    println!("ladder z*(1) = {:.12} (gap to 1: {:.3e}) t={:?}", z1.value, z1.value - 1.0, t0.elapsed());
    let t0 = std::time::Instant::now();
    let r2 = an2.radius().unwrap();
    println!("ladder R = {:.12} bracket w={:.2e} undecided={} t={:?}", r2.value, r2.hi - r2.lo, r2.undecided, t0.elapsed());
    let xi_lad = an2.xi_converged(1.05).unwrap();
    println!("ladder xi(1.05) = {:?}", xi_lad.xi);
    for i in 0..2 {
        println!("  fi_plus_radius[{i}] = {:?}", an2.fi_plus_radius(&xi_lad, i).unwrap());
    }

    // candidate specs for the lambda=1.05 criterion: need R > 1.05
    for (name, spec) in [
        ("K3*K3", FreeProduct::new(vec![
            FactorGroup::cyclic(3, &[(1, 0.5), (2, 0.5)]).unwrap(),
            FactorGroup::cyclic(3, &[(1, 0.5), (2, 0.5)]).unwrap()], vec![0.5,0.5], 0.5).unwrap()),
        ("K5*K5", FreeProduct::new(vec![
            FactorGroup::cyclic(5, &[(1,0.25),(2,0.25),(3,0.25),(4,0.25)]).unwrap(),
            FactorGroup::cyclic(5, &[(1,0.25),(2,0.25),(3,0.25),(4,0.25)]).unwrap()], vec![0.5,0.5], 0.5).unwrap()),
        ("Z5supp14*Z5supp14", FreeProduct::new(vec![
            FactorGroup::cyclic(5, &[(1,0.5),(4,0.5)]).unwrap(),
            FactorGroup::cyclic(5, &[(1,0.5),(4,0.5)]).unwrap()], vec![0.5,0.5], 0.5).unwrap()),
    ] {
        let a = Analyzer::new(&spec, SolverConfig::default());
        let rr = a.radius().unwrap();
        println!("{name}: R = {:.10} bracket w={:.2e} undecided={}", rr.value, rr.hi-rr.lo, rr.undecided);
        if rr.lo > 1.05 {
            let xi = a.xi_converged(1.05).unwrap();
            println!("   xi(1.05) = {:?}", xi.xi);
        }
    }

    // shallow ladder: xi can exceed 1?
    let lad2 = FreeProduct::new(
        vec![FactorGroup::ladder(2).unwrap(), FactorGroup::ladder(2).unwrap()],
        vec![0.5, 0.5], 0.5).unwrap();
    let an3 = Analyzer::new(&lad2, SolverConfig::default());
    let r3 = an3.radius().unwrap();
    println!("ladder(d=2) R = {:.10}", r3.value);
    for lam in [1.2, 1.5, 2.0, r3.lo] {
        if lam <= r3.lo {
            let xi = an3.xi_converged(lam).unwrap();
            println!("  lambda={lam:.6} xi={:?}", xi.xi);
        }
    }
}
