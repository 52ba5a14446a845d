use brwdim::group::{FactorGroup, FreeProduct};
use brwdim::simulator::*;

fn main() {
    let f1 = FactorGroup::cyclic(3, &[(1, 0.5), (2, 0.5)]).unwrap();
    let f2 = FactorGroup::cyclic(2, &[(1, 1.0)]).unwrap();
    let spec = FreeProduct::new(vec![f1, f2], vec![0.5, 0.5], 0.5).unwrap();
    let nu = OffspringDistribution::new(vec![0.0, 0.99, 0.01]).unwrap();
    let report = embedded_gw(&spec, &nu, 0, 12, 400, 40, 2_000_000, 99).unwrap();
    println!("survival={} stage1={}±{} excluded={} stages={:?}", report.survival_fraction, report.stage1_mean, report.stage1_stderr, report.excluded, &report.stages[..4]);
}
