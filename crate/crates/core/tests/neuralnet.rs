mod common;

use common::{fd_grad, max_rel_err, random_matrix, random_net, random_sizes};
use ndarray::Array2;
use rand::Rng as _;
use v2x_core::neuralnet::{Head, ParamSet};
use v2x_core::rng;

fn linear_functional(p: &ParamSet, x: &Array2<f64>, c: &Array2<f64>) -> f64 {
    (&p.predict(x.view()) * c).sum()
}

#[test]
fn gradient_matches_finite_differences_on_random_nets() {
    let mut r = rng::stream(2024, 0);
    let mut worst = 0.0f64;
    for trial in 0..100u64 {
        let head = if trial % 2 == 0 {
            Head::Linear
        } else {
            Head::SigmoidScaled(r.random_range(0.5..3.0))
        };
        let out = r.random_range(1..=4);
        let sizes = random_sizes(&mut r, 10, out);
        let p = random_net(&sizes, head, trial);
        let x = random_matrix(&mut r, 3, sizes[0], -1.0, 1.0);
        let c = random_matrix(&mut r, 3, out, -1.0, 1.0);
        let cache = p.forward(x.view());
        let (g, _) = p.backward(&cache, c.view());
        let flat = p.to_flat();
        let fd = fd_grad(|w| linear_functional(&p.with_flat(w).unwrap(), &x, &c), &flat, 1e-5);
        worst = worst.max(max_rel_err(&g.to_flat(), &fd));
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

#[test]
fn input_gradient_matches_finite_differences() {
    let mut r = rng::stream(7, 0);
    let p = random_net(&[4, 8, 3], Head::Linear, 1);
    let x = random_matrix(&mut r, 1, 4, -1.0, 1.0);
    let c = random_matrix(&mut r, 1, 3, -1.0, 1.0);
    let (_, gx) = p.backward(&p.forward(x.view()), c.view());
    let fd = fd_grad(
        |xi| linear_functional(&p, &Array2::from_shape_vec((1, 4), xi.to_vec()).unwrap(), &c),
        x.as_slice().unwrap(),
        1e-5,
    );
    assert!(max_rel_err(gx.as_slice().unwrap(), &fd) < 1e-4);
}

fn half_sq_grad(p: &ParamSet, x: &Array2<f64>, t: &Array2<f64>) -> Vec<f64> {
    let cache = p.forward(x.view());
    let dout = &cache.output - t;
    p.backward(&cache, dout.view()).0.to_flat()
}

#[test]
fn hessian_vector_product_matches_differenced_gradient() {
    let mut r = rng::stream(5, 0);
    for trial in 0..20u64 {
        let head = if trial % 2 == 0 {
            Head::Linear
        } else {
            Head::SigmoidScaled(2.0)
        };
        let sizes = random_sizes(&mut r, 8, 2);
        let p = random_net(&sizes, head, 100 + trial);
        let x = random_matrix(&mut r, 4, sizes[0], -1.0, 1.0);
        let t = random_matrix(&mut r, 4, 2, -1.0, 1.0);
        let v = random_net(&sizes, head, 200 + trial);
        let cache = p.forward(x.view());
        let rc = p.forward_r(&cache, None, Some(&v));
        let dout = &cache.output - &t;
        let hv = p
            .backward_r(&cache, &rc, dout.view(), rc.r_output.view(), Some(&v))
            .r_grad
            .to_flat();
        let h = 1e-5;
        let mut up = p.clone();
        up.axpy(h, &v);
        let mut down = p.clone();
        down.axpy(-h, &v);
        let fd: Vec<f64> = half_sq_grad(&up, &x, &t)
            .iter()
            .zip(half_sq_grad(&down, &x, &t))
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        let err = max_rel_err(&hv, &fd);
        assert!(err < 1e-4, "trial {trial}: {err:e}");
    }
}

#[test]
fn input_direction_derivative_matches_finite_differences() {
    let mut r = rng::stream(9, 0);
    let p = random_net(&[5, 7, 6, 1], Head::SigmoidScaled(4.0), 3);
    let x = random_matrix(&mut r, 2, 5, -1.0, 1.0);
    let d = random_matrix(&mut r, 2, 5, -1.0, 1.0);
    let rc = p.forward_r(&p.forward(x.view()), Some(d.view()), None);
    let h = 1e-6;
    let fd = (p.predict((&x + &(&d * h)).view()) - p.predict((&x - &(&d * h)).view())) / (2.0 * h);
    assert!(max_rel_err(rc.r_output.as_slice().unwrap(), fd.as_slice().unwrap()) < 1e-4);
}
