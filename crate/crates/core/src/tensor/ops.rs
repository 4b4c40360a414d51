//! Forward kernels shared by the tape and the untracked tensor API.

use super::Tensor;
use crate::error::{Error, Result};

/// `c = a·b + beta·c` for row-major operands described by explicit strides.
///
/// `a` is `m×k` with strides `(rsa, csa)`, `b` is `k×n` with `(rsb, csb)`,
/// `c` is a contiguous row-major `m×n` buffer.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(m == 0 || k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    assert!(k == 0 || n == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserts above bound every element the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0] {
        return Err(Error::dim("matmul", &a.shape, &b.shape));
    }
    let (m, k, n) = (a.shape[0], a.shape[1], b.shape[1]);
    let mut out = vec![0.0; m * n];
    gemm(m, k, n, &a.data, (k, 1), &b.data, (n, 1), 0.0, &mut out);
    Tensor::new(vec![m, n], out)
}

pub(crate) fn check_affine(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<()> {
    if w.rank() != 2 || x.rank() == 0 || *x.shape.last().unwrap() != w.shape[0] {
        return Err(Error::dim("affine", &x.shape, &w.shape));
    }
    if b.shape != [w.shape[1]] {
        return Err(Error::dim("affine", &w.shape, &b.shape));
    }
    Ok(())
}

/// Dense layer applied independently over every leading index of `x`.
pub fn affine(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_affine(x, w, b)?;
    let (rows, k) = x.split_last();
    let n = w.shape[1];
    let mut out = Vec::with_capacity(rows * n);
    for _ in 0..rows {
        out.extend_from_slice(&b.data);
    }
    gemm(rows, k, n, &x.data, (k, 1), &w.data, (n, 1), 1.0, &mut out);
    let mut shape = x.shape.clone();
    *shape.last_mut().unwrap() = n;
    Tensor::new(shape, out)
}

fn map(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor {
        shape: x.shape.clone(),
        data: x.data.iter().map(|&v| f(v)).collect(),
    }
}

pub fn sine_activation(x: &Tensor, omega: f64) -> Tensor {
    map(x, |v| super::trig::sin(omega * v))
}

pub fn tanh_activation(x: &Tensor) -> Tensor {
    map(x, f64::tanh)
}

pub fn relu_activation(x: &Tensor) -> Tensor {
    map(x, |v| v.max(0.0))
}

pub(crate) fn check_hidden(op: &'static str, branch: &Tensor, trunk: &Tensor) -> Result<()> {
    if branch.rank() != 2
        || trunk.rank() != 3
        || branch.shape[0] != trunk.shape[0]
        || branch.shape[1] != trunk.shape[2]
    {
        return Err(Error::dim(op, &branch.shape, &trunk.shape));
    }
    Ok(())
}

/// `out[b,i] = Σ_h branch[b,h]·trunk[b,i,h]`.
pub fn dot_hidden(branch: &Tensor, trunk: &Tensor) -> Result<Tensor> {
    check_hidden("dot_hidden", branch, trunk)?;
    let (nb, ni, nh) = (trunk.shape[0], trunk.shape[1], trunk.shape[2]);
    let mut out = Vec::with_capacity(nb * ni);
    for (bv, tb) in branch.data.chunks_exact(nh).zip(trunk.data.chunks_exact(ni * nh)) {
        for row in tb.chunks_exact(nh) {
            let mut acc = 0.0;
            for h in 0..nh {
                acc += bv[h] * row[h];
            }
            out.push(acc);
        }
    }
    Tensor::new(vec![nb, ni], out)
}

/// `F[b,i,h] = branch[b,h]·trunk[b,i,h]`.
pub fn fuse(branch: &Tensor, trunk: &Tensor) -> Result<Tensor> {
    check_hidden("fuse", branch, trunk)?;
    let (ni, nh) = (trunk.shape[1], trunk.shape[2]);
    let mut out = Vec::with_capacity(trunk.numel());
    for (bv, tb) in branch.data.chunks_exact(nh).zip(trunk.data.chunks_exact(ni * nh)) {
        for row in tb.chunks_exact(nh) {
            out.extend(bv.iter().zip(row).map(|(b, t)| b * t));
        }
    }
    Tensor::new(trunk.shape.clone(), out)
}

pub(crate) fn check_contract(branch: &Tensor, trunk: &Tensor) -> Result<()> {
    if branch.rank() != 3
        || trunk.rank() != 4
        || branch.shape[0] != trunk.shape[0]
        || branch.shape[1] != trunk.shape[2]
        || branch.shape[2] != trunk.shape[3]
    {
        return Err(Error::dim("contract_vector", &branch.shape, &trunk.shape));
    }
    Ok(())
}

/// `out[b,i,c] = Σ_h branch[b,h,c]·trunk[b,i,h,c]`.
pub fn contract_vector(branch: &Tensor, trunk: &Tensor) -> Result<Tensor> {
    check_contract(branch, trunk)?;
    let (nb, ni, nh, nc) = (
        trunk.shape[0],
        trunk.shape[1],
        trunk.shape[2],
        trunk.shape[3],
    );
    let mut out = Vec::with_capacity(nb * ni * nc);
    for (bv, tb) in branch
        .data
        .chunks_exact(nh * nc)
        .zip(trunk.data.chunks_exact(ni * nh * nc))
    {
        for node in tb.chunks_exact(nh * nc) {
            for c in 0..nc {
                let mut acc = 0.0;
                for h in 0..nh {
                    acc += bv[h * nc + c] * node[h * nc + c];
                }
                out.push(acc);
            }
        }
    }
    Tensor::new(vec![nb, ni, nc], out)
}

pub fn mse(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    if pred.shape != target.shape {
        return Err(Error::dim("mse", &pred.shape, &target.shape));
    }
    let sum: f64 = pred
        .data
        .iter()
        .zip(&target.data)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(Tensor::scalar(sum / pred.numel() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_hand_cases() {
        let eye = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let m = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(matmul(&eye, &m).unwrap(), m);
        let r = matmul(&t(&[1, 2], &[1.0, 2.0]), &t(&[2, 1], &[3.0, 4.0])).unwrap();
        assert_eq!(r.data(), &[11.0]);
    }

    #[test]
    fn matmul_mismatch_names_both_shapes() {
        let err = matmul(&Tensor::zeros(&[2, 3]), &Tensor::zeros(&[2, 3])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
    }

    #[test]
    fn affine_shape_and_zero_weight() {
        let x = Tensor::filled(&[2, 5, 3], 0.7);
        let w = Tensor::zeros(&[3, 8]);
        let b = Tensor::filled(&[8], 1.25);
        let y = affine(&x, &w, &b).unwrap();
        assert_eq!(y.shape(), &[2, 5, 8]);
        assert!(y.data().iter().all(|&v| v == 1.25));
        assert!(affine(&x, &Tensor::zeros(&[4, 8]), &b).is_err());
    }

    #[test]
    fn sine_hand_values() {
        let y = sine_activation(&t(&[2], &[0.0, std::f64::consts::PI / 60.0]), 30.0);
        assert_eq!(y.data()[0], 0.0);
        assert!((y.data()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tanh_saturates() {
        let y = tanh_activation(&t(&[2], &[0.0, 20.0]));
        assert_eq!(y.data()[0], 0.0);
        assert!((y.data()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dot_hidden_hand_case() {
        let out = dot_hidden(
            &t(&[1, 2], &[1.0, 2.0]),
            &t(&[1, 2, 2], &[3.0, 4.0, 5.0, 6.0]),
        )
        .unwrap();
        assert_eq!(out.shape(), &[1, 2]);
        assert_eq!(out.data(), &[11.0, 17.0]);
    }

    #[test]
    fn dot_hidden_rejects_h_mismatch() {
        assert!(dot_hidden(&Tensor::zeros(&[1, 3]), &Tensor::zeros(&[1, 2, 2])).is_err());
    }

    #[test]
    fn fuse_hand_case_and_identity() {
        let trunk = t(&[1, 2, 2], &[1.0, 1.0, 4.0, 5.0]);
        let out = fuse(&t(&[1, 2], &[2.0, 3.0]), &trunk).unwrap();
        assert_eq!(out.data(), &[2.0, 3.0, 8.0, 15.0]);
        let same = fuse(&Tensor::filled(&[1, 2], 1.0), &trunk).unwrap();
        assert_eq!(same, trunk);
    }

    #[test]
    fn contract_vector_with_one_component_is_dot_hidden() {
        let branch = t(&[1, 3], &[0.5, -1.0, 2.0]);
        let trunk = t(&[1, 2, 3], &[1.0, 2.0, 3.0, -4.0, 0.25, 7.0]);
        let dot = dot_hidden(&branch, &trunk).unwrap();
        let cv = contract_vector(
            &branch.clone().reshape(&[1, 3, 1]).unwrap(),
            &trunk.clone().reshape(&[1, 2, 3, 1]).unwrap(),
        )
        .unwrap();
        assert_eq!(cv.data(), dot.data());
    }

    #[test]
    fn contract_vector_ones_branch_sums_trunk() {
        let trunk = Tensor::new(vec![1, 2, 3, 2], (0..12).map(f64::from).collect()).unwrap();
        let out = contract_vector(&Tensor::filled(&[1, 3, 2], 1.0), &trunk).unwrap();
        // node 0: c0 = 0+2+4, c1 = 1+3+5; node 1: 6+8+10, 7+9+11
        assert_eq!(out.data(), &[6.0, 9.0, 24.0, 27.0]);
    }

    #[test]
    fn mse_hand_case() {
        let p = t(&[2], &[1.0, 3.0]);
        assert_eq!(mse(&p, &Tensor::zeros(&[2])).unwrap().item().unwrap(), 5.0);
        assert_eq!(mse(&p, &p).unwrap().item().unwrap(), 0.0);
        assert!(mse(&p, &Tensor::zeros(&[3])).is_err());
    }
}
