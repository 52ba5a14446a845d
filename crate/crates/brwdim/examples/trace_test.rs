use brwdim::genfun::{Analyzer, SolverConfig};
use brwdim::group::{FactorGroup, FreeProduct};
use brwdim::oracle::PathOracle;

fn main() {
    let f1 = FactorGroup::cyclic(3, &[(1, 0.5), (2, 0.5)]).unwrap();
    let f2 = FactorGroup::cyclic(2, &[(1, 1.0)]).unwrap();
    let spec = FreeProduct::new(vec![f1, f2], vec![0.5, 0.5], 0.5).unwrap();
    let an = Analyzer::new(&spec, SolverConfig::default());
    let xi = an.xi_converged(1.01).unwrap();
    let ab = spec.word(&[(0, 1), (1, 1)]).unwrap();
    let fw = an.f_word(&xi, &ab).unwrap();
    println!("f_word(ab|1.01) = {fw:.12}");
    for cap in [24u32, 32, 40] {
        let t0 = std::time::Instant::now();
        let oracle = PathOracle::new(&spec, Some(cap));
        let tab = oracle.first_visit_series(&ab, 4000).unwrap();
        let t = t0.elapsed();
        for n in [200usize, 500, 1000, 2000, 4000] {
            let s: f64 = tab.coeffs[..=n].iter().enumerate().map(|(k, &c)| c * 1.01f64.powi(k as i32)).sum();
            print!(" N={n}: {:.3e}", fw - s);
        }
        println!("  [cap={cap} states={} t={t:?}]", oracle.state_count());
    }
    // xi comparison at lambda = 1
    let xi1 = an.xi_converged(1.0).unwrap();
    for cap in [24u32, 28, 32] {
        let oracle = PathOracle::new(&spec, Some(cap));
        let tab = oracle.first_passage_set_series(0, 3000);
        for n in [200usize, 600, 1000, 1500, 2000, 3000] {
            let s: f64 = tab.coeffs[..=n].iter().sum();
            print!(" N={n}: {:.3e}", xi1.xi[0] - s);
        }
        println!("  [xi clause cap={cap}]");
    }
}
