use cornerbie::corner_basis::*;

fn filtered_roots(phi: &PhiBasis, idx: usize) -> Vec<f64> {
    let grid = &phi.grid;
    let f = &phi.phi[idx];
    let scaled: Vec<f64> = f.iter().zip(&grid.weights).map(|(v, w)| v * w.sqrt()).collect();
    let gmax = scaled.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let mut peak = 0.0f64;
    let mut roots = Vec::new();
    for i in 0..grid.len() - 1 {
        peak = peak.max(scaled[i].abs());
        if grid.nodes[i] < 1e-14 { continue; }
        if f[i] != 0.0 && f[i].signum() != f[i + 1].signum() && peak >= 0.05 * gmax {
            peak = 0.0;
            let (mut lo, mut hi) = (grid.nodes[i], grid.nodes[i + 1]);
            let flo = f[i];
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                let fm = grid.eval(f, mid);
                if fm == 0.0 { lo = mid; hi = mid; break; }
                if fm.signum() == flo.signum() { lo = mid; } else { hi = mid; }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    roots
}

fn main() {
    let family = PowerFamily::default_family().unwrap();
    let phi = svd_basis(&family, 3e-15).unwrap();
    let k = 35usize;
    let mut nodes = filtered_roots(&phi, k - 1); // 34 roots of phi_35 (0-indexed 34)
    println!("roots of phi[34]: {}", nodes.len());
    nodes.push(1.0);
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut v = faer::Mat::zeros(k, k);
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        for (j, &x) in nodes.iter().enumerate() { v[(i, j)] = phi.eval(i, x); }
        rhs[i] = phi.grid.weights.iter().zip(&phi.phi[i]).map(|(w, p)| w * p).sum();
    }
    let w = cornerbie::linalg::solve_dense(&v, &rhs).unwrap();
    let negs: Vec<(f64, f64)> = nodes.iter().zip(&w).filter(|(_, &wi)| wi <= 0.0).map(|(&x, &wi)| (x, wi)).collect();
    println!("negatives: {negs:?}");
    let u = faer::Mat::from_fn(k, k, |i, j| phi.eval(i, nodes[j]) * w[j].abs().sqrt());
    let sv = cornerbie::linalg::singular_values(&u).unwrap();
    println!("cond(U) = {:.3e}", sv[0] / sv[k - 1]);
    let i1: f64 = nodes.iter().zip(&w).map(|(&x, &wi)| x.sqrt() * wi).sum();
    let i2: f64 = nodes.iter().zip(&w).map(|(&x, &wi)| x.powf(49.5) * wi).sum();
    println!("int x^.5 err {:.2e}; int x^49.5 rel {:.2e}", (i1 - 2.0/3.0).abs(), (i2 - 1.0/50.5).abs() * 50.5);
    let mut worst = 0.0f64;
    for m in 0..k {
        let exact: f64 = phi.grid.weights.iter().zip(&phi.phi[m]).map(|(w2, p)| w2 * p).sum();
        let got: f64 = nodes.iter().zip(&w).map(|(&x, &wi)| phi.eval(m, x) * wi).sum();
        worst = worst.max((got - exact).abs());
    }
    println!("max rule err on phi: {:.2e}", worst);
}
