mod common;

use common::{max_gradient_error, reference_forward, ACTIONS, STEP};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sorb::distval::mlp::Mlp;

#[test]
fn analytic_gradient_matches_central_differences() {
    let worst = max_gradient_error(50, 50);
    println!("max relative error over 50 draws: {worst:.3e}");
    assert!(worst < 1e-4, "max relative error {worst:.3e}");
}

#[test]
fn scalar_head_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let sizes = [3, 6, ACTIONS];
    let net = Mlp::<f64>::new(&sizes, &mut rng);
    let params = net.params().to_vec();
    let xs: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let examples: Vec<(&[f64], usize, f64)> = xs.iter().enumerate().map(|(i, x)| (&x[..], i % ACTIONS, i as f64)).collect();
    let loss_at = |p: &[f64]| {
        let total: f64 = examples
            .iter()
            .map(|(x, a, t)| {
                let (out, _) = reference_forward(&sizes, p, x);
                (out[*a] - t).powi(2)
            })
            .sum();
        total / examples.len() as f64
    };
    let mut ws = net.workspace();
    let mut grads = vec![0.0; params.len()];
    net.squared_loss_and_gradient(&examples, &mut ws, &mut grads).unwrap();
    let mut p = params.clone();
    for k in 0..params.len() {
        p[k] = params[k] + STEP;
        let up = loss_at(&p);
        p[k] = params[k] - STEP;
        let down = loss_at(&p);
        p[k] = params[k];
        let numeric = (up - down) / (2.0 * STEP);
        let scale = grads[k].abs().max(numeric.abs());
        if scale > 1e-9 {
            assert!((grads[k] - numeric).abs() / scale < 1e-4, "param {k}: {} vs {numeric}", grads[k]);
        }
    }
}
