mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use common::{grad_check, tensor, uniform_vec};
use dysuse_core::numerics::{mask_from, Adam, AdamConfig, ParamSet, Tape, Tensor};
use dysuse_core::Error;
use proptest::prelude::*;

fn single(t: Tensor) -> ParamSet {
    let mut p = ParamSet::new();
    p.insert("x", t).unwrap();
    p
}

#[test]
fn relu1_values() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::row(vec![-0.3, 0.4, 1.7]));
    let y = tape.relu1(x);
    assert_eq!(tape.value(y).data(), &[0.0, 0.4, 1.0]);
}

#[test]
fn masked_softmax_single_unmasked_and_fully_masked() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::new(2, 2, vec![std::f64::consts::E, 3.0, 1.0, 2.0]).unwrap());
    let mask = Tensor::new(2, 2, vec![0.0, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap();
    let y = tape.masked_softmax(x, &mask).unwrap();
    assert_eq!(tape.value(y).data(), &[1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn mae_of_identical_is_zero() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::col(vec![0.2, 0.8]));
    let m = tape.mae(x, &[0.2, 0.8]).unwrap();
    assert_eq!(tape.value(m).item(), 0.0);
}

#[test]
fn linear_gradient_is_input() {
    let mut tape = Tape::new();
    let w = tape.param(Tensor::row(vec![0.5, -1.0, 2.0]));
    let x = tape.constant(Tensor::row(vec![3.0, 4.0, 5.0]));
    let wx = tape.mul(w, x).unwrap();
    let loss = tape.sum(wx);
    let g = tape.backward(loss).unwrap();
    assert_eq!(g.get(w).unwrap().data(), &[3.0, 4.0, 5.0]);
    assert!(g.get(x).is_none());
}

#[test]
fn kink_conventions() {
    let slopes = |f: &dyn Fn(&mut Tape, dysuse_core::numerics::Var) -> dysuse_core::numerics::Var, xs: Vec<f64>| {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::row(xs));
        let y = f(&mut tape, x);
        let loss = tape.sum(y);
        tape.backward(loss).unwrap().get(x).unwrap().data().to_vec()
    };
    assert_eq!(slopes(&|t, x| t.relu1(x), vec![0.5, 1.5, -0.5, 0.0, 1.0]), vec![1.0, 0.0, 0.0, 0.0, 1.0]);
    assert_eq!(slopes(&|t, x| t.leaky_relu(x, 0.01), vec![2.0, -2.0, 0.0]), vec![1.0, 0.01, 0.01]);
}

#[test]
fn backward_requires_scalar() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::row(vec![1.0, 2.0]));
    assert!(matches!(tape.backward(x), Err(Error::Validation(_))));
}

#[test]
fn shape_mismatches_are_errors() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::zeros(2, 3));
    let b = tape.constant(Tensor::zeros(2, 2));
    assert!(matches!(tape.matmul(a, a), Err(Error::Shape { .. })));
    assert!(matches!(tape.add(a, b), Err(Error::Shape { .. })));
    assert!(matches!(tape.scale(a, b), Err(Error::Shape { .. })));
    assert!(matches!(tape.abs_diff_sum(a, &[0.0]), Err(Error::Shape { .. })));
    assert!(tape.gather_rows(a, &Arc::from(vec![5usize])).is_err());
    assert!(Tensor::new(2, 2, vec![0.0]).is_err());
}

#[test]
fn every_op_matches_finite_differences() {
    let mut p = ParamSet::new();
    p.insert("a", tensor(4, 3, 1)).unwrap();
    p.insert("b", tensor(3, 2, 2)).unwrap();
    p.insert("s", Tensor::scalar(0.7)).unwrap();
    p.insert("row", tensor(1, 2, 3)).unwrap();
    p.insert("col", tensor(4, 1, 4)).unwrap();
    p.insert("seq", tensor(4, 3, 5)).unwrap();
    let src: Arc<[usize]> = Arc::from(vec![0usize, 2, 3, 3, 1]);
    let dst: Arc<[usize]> = Arc::from(vec![1usize, 1, 0, 2, 3]);
    let target = uniform_vec(9, 4, 0.0, 1.0);
    let mask = mask_from(|i, j| j <= i, 3);
    let (worst, at) = grad_check(&p, 1e-5, 1e-6, &|t, v| {
        let (a, b, s, row, col, seq) = (v[0], v[1], v[2], v[3], v[4], v[5]);
        let ab = t.matmul(a, b).unwrap();
        let ab = t.add_row(ab, row).unwrap();
        let ab = t.mul_col(ab, col).unwrap();
        let sc = t.scale(ab, s).unwrap();
        let sg = t.sigmoid(sc);
        let lk = t.leaky_relu(ab, 0.01);
        let cat = t.concat_cols(sg, lk).unwrap();
        let sl = t.slice_cols(cat, 1, 2).unwrap();
        let g = t.gather_rows(sl, &src).unwrap();
        let sct = t.scatter_add_rows(g, &dst, 4).unwrap();
        let prod = t.mul(sct, sl).unwrap();
        let diff = t.sub(prod, sl).unwrap();
        // attention-shaped block on `seq`
        let outer = t.outer_rows(seq, seq).unwrap();
        let flat = t.reshape(outer, 12, 3).unwrap();
        let sm = t.masked_softmax(flat, &mask).unwrap();
        let beta = t.reshape(sm, 4, 9).unwrap();
        let z = t.batched_matvec(beta, seq).unwrap();
        let z1 = t.slice_cols(z, 2, 1).unwrap();
        let head = t.relu1(z1);
        let l1 = t.mae(head, &target).unwrap();
        let l2 = t.sum(diff);
        t.add(l1, l2).unwrap()
    });
    assert!(worst <= 1e-4, "worst relative error {worst} at {at}");
}

#[test]
fn random_composite_of_twenty_parameters() {
    for seed in 0..5 {
        let mut p = ParamSet::new();
        p.insert("w1", tensor(2, 4, seed * 10)).unwrap();
        p.insert("w2", tensor(4, 2, seed * 10 + 1)).unwrap();
        p.insert("b", tensor(1, 4, seed * 10 + 2)).unwrap();
        assert_eq!(p.n_scalars(), 20);
        let x = tensor(6, 2, seed * 10 + 3);
        let y = uniform_vec(seed, 12, 0.0, 1.0);
        let (worst, at) = grad_check(&p, 1e-5, 1e-6, &|t, v| {
            let xv = t.constant(x.clone());
            let h = t.matmul(xv, v[0]).unwrap();
            let h = t.add_row(h, v[2]).unwrap();
            let h = t.leaky_relu(h, 0.01);
            let o = t.matmul(h, v[1]).unwrap();
            let o = t.sigmoid(o);
            t.abs_diff_sum(o, &y).unwrap()
        });
        assert!(worst <= 1e-4, "seed {seed}: {worst} at {at}");
    }
}

#[test]
fn adam_zero_gradient_is_a_no_op() {
    let mut p = single(Tensor::row(vec![0.3, -0.2]));
    let before = p.clone();
    let mut opt = Adam::new(AdamConfig::default());
    opt.step(&mut p, &[Tensor::zeros(1, 2)]).unwrap();
    assert_eq!(p, before);
}

#[test]
fn adam_first_step_is_lr_times_sign() {
    let mut p = single(Tensor::scalar(0.0));
    let mut opt = Adam::new(AdamConfig { lr: 0.1, ..AdamConfig::default() });
    opt.step(&mut p, &[Tensor::scalar(1.0)]).unwrap();
    // bias-corrected moments give m̂ = 1, v̂ = 1
    let expected = -0.1 * 1.0 / (1.0 + 1e-8);
    assert!((p.get(p.id("x").unwrap()).item() - expected).abs() < 1e-15);
    let first = p.get(p.id("x").unwrap()).item();
    opt.step(&mut p, &[Tensor::scalar(1.0)]).unwrap();
    assert!(p.get(p.id("x").unwrap()).item() < first);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let mut p = ParamSet::new();
    p.insert("structural/w0", tensor(3, 2, 7)).unwrap();
    p.insert("temporal/pos", Tensor::row(vec![1.0 / 3.0, -0.0, 1e-300, f64::MAX])).unwrap();
    let mut config = BTreeMap::new();
    config.insert("layers".to_string(), "3".to_string());
    config.insert("note".to_string(), "two words".to_string());
    let text = p.write_checkpoint(&config);
    let (back, cfg) = ParamSet::read_checkpoint(&text).unwrap();
    assert_eq!(cfg, config);
    for ((na, ta), (nb, tb)) in p.iter().zip(back.iter()) {
        assert_eq!(na, nb);
        assert_eq!(ta.shape(), tb.shape());
        let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(ta), bits(tb));
    }
}

#[test]
fn checkpoint_errors() {
    let p = single(tensor(2, 2, 1));
    let text = p.write_checkpoint(&BTreeMap::new());
    let cut = &text[..text.len() - 10];
    assert!(matches!(ParamSet::read_checkpoint(cut), Err(Error::Corrupt(_))));
    let newer = text.replace("v1", "v2");
    assert!(matches!(ParamSet::read_checkpoint(&newer), Err(Error::Version(_))));
    assert!(matches!(ParamSet::read_checkpoint("hello"), Err(Error::Corrupt(_))));
}

proptest! {
    #[test]
    fn relu1_is_bounded(xs in prop::collection::vec(-1e6f64..1e6, 1..50)) {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::row(xs));
        let y = tape.relu1(x);
        prop_assert!(tape.value(y).data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn masked_softmax_rows(xs in prop::collection::vec(-30.0f64..30.0, 16), allowed in prop::collection::vec(any::<bool>(), 16)) {
        let mask = Tensor::new(4, 4, allowed.iter().map(|&a| if a { 0.0 } else { f64::NEG_INFINITY }).collect()).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(4, 4, xs).unwrap());
        let y = tape.masked_softmax(x, &mask).unwrap();
        let y = tape.value(y);
        for r in 0..4 {
            let row = y.row_slice(r);
            let any = allowed[r * 4..r * 4 + 4].iter().any(|&a| a);
            let total: f64 = row.iter().sum();
            if any {
                prop_assert!((total - 1.0).abs() < 1e-12);
            } else {
                prop_assert_eq!(total, 0.0);
            }
            for c in 0..4 {
                if !allowed[r * 4 + c] {
                    prop_assert_eq!(row[c], 0.0);
                }
            }
        }
    }
}
