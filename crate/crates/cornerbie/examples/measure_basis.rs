use cornerbie::corner_basis::*;

fn main() {
    let t0 = std::time::Instant::now();
    let basis = CornerBasis::build(1e-13).unwrap();
    println!("K = {} ({:?})", basis.k(), t0.elapsed());
    let nodes = basis.nodes();
    println!("nodes: n={} smallest={:.6e} largest={:.6e}", nodes.len(), nodes[0], nodes[nodes.len()-1]);
    println!("weights positive: {}", basis.weights().iter().all(|&w| w > 0.0));
    println!("cond(U) = {:.4e}", basis.cond_u());
    let mut worst = (0.0f64, 0.0f64);
    let mut state = 0x9E3779B97F4A7C15u64;
    for i in 0..200 {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let u = (state >> 11) as f64 / (1u64 << 53) as f64;
        let mu = if i % 40 == 0 { 0.0 } else { 0.5 + 49.5 * u };
        let r = basis.projection_residual(mu);
        if r > worst.0 { worst = (r, mu); }
    }
    println!("worst residual {:.3e} at mu={:.4}", worst.0, worst.1);
    let i_sqrt: f64 = basis.nodes().iter().zip(basis.weights()).map(|(&x, &w)| x.sqrt() * w).sum();
    println!("int x^0.5 err = {:.3e}", (i_sqrt - 2.0/3.0).abs());
    let i_hi: f64 = basis.nodes().iter().zip(basis.weights()).map(|(&x, &w)| x.powf(49.5) * w).sum();
    println!("int x^49.5 rel err = {:.3e}", (i_hi - 1.0/50.5).abs() * 50.5);
    // log-power absorption
    println!("UU^-1 check + two-sided eval sanity via library tests");
    println!("total {:?}", t0.elapsed());
}
