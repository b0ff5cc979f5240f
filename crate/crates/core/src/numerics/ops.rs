//! Forward kernels and their analytic derivative rules.
//!
//! The tape in [`super::graph`] calls into these; they are also usable
//! directly on plain tensors.

use super::{NumericsError, Tensor};

/// Row-major boolean matrix used as an attention support.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl BitMatrix {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self, NumericsError> {
        if bits.len() != rows * cols {
            return Err(NumericsError::DataLength {
                shape: vec![rows, cols],
                len: bits.len(),
            });
        }
        Ok(BitMatrix { rows, cols, bits })
    }

    pub fn filled(rows: usize, cols: usize, value: bool) -> Self {
        BitMatrix {
            rows,
            cols,
            bits: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::filled(n, n, false);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.bits[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.bits[i * self.cols..(i + 1) * self.cols]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Index of the first row with no set bit.
    pub fn first_empty_row(&self) -> Option<usize> {
        (0..self.rows).find(|&i| !self.row(i).iter().any(|&b| b))
    }

    /// Mask as a 0/1 tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::matrix(
            self.rows,
            self.cols,
            self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
        .expect("shape matches bit count")
    }
}

fn softmax_row(x: &[f64], allowed: Option<&[bool]>, out: &mut [f64]) {
    let keep = |j: usize| allowed.map_or(true, |a| a[j]);
    let mut max = f64::NEG_INFINITY;
    for (j, &v) in x.iter().enumerate() {
        if keep(j) && v > max {
            max = v;
        }
    }
    let mut total = 0.0;
    for (j, (&v, o)) in x.iter().zip(out.iter_mut()).enumerate() {
        // additive -inf: excluded positions contribute exp(-inf) = 0
        *o = if keep(j) { (v - max).exp() } else { 0.0 };
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Numerically stable softmax along each row.
pub fn softmax_rows(x: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(x.shape());
    for i in 0..x.rows() {
        softmax_row(x.row(i), None, out.row_mut(i));
    }
    out
}

/// Softmax along rows restricted to the set bits of `mask`; excluded
/// positions get exactly zero probability.
pub fn masked_softmax_rows(x: &Tensor, mask: &BitMatrix) -> Result<Tensor, NumericsError> {
    check_mask(x, mask)?;
    let mut out = Tensor::zeros(x.shape());
    for i in 0..x.rows() {
        softmax_row(x.row(i), Some(mask.row(i)), out.row_mut(i));
    }
    Ok(out)
}

pub(crate) fn check_mask(x: &Tensor, mask: &BitMatrix) -> Result<(), NumericsError> {
    if x.shape().len() != 2 || mask.rows() != x.rows() || mask.cols() != x.cols() {
        return Err(NumericsError::Shape {
            op: "mask",
            left: x.shape().to_vec(),
            right: vec![mask.rows(), mask.cols()],
        });
    }
    if let Some(row) = mask.first_empty_row() {
        return Err(NumericsError::EmptyMaskRow { row });
    }
    Ok(())
}

/// Backward rule shared by both softmax variants: `dx = y ⊙ (dy − ⟨dy, y⟩)`.
pub fn softmax_rows_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(y.shape());
    for i in 0..y.rows() {
        let (yr, dyr) = (y.row(i), dy.row(i));
        let dot: f64 = yr.iter().zip(dyr).map(|(a, b)| a * b).sum();
        for ((d, &yv), &g) in dx.row_mut(i).iter_mut().zip(yr).zip(dyr) {
            *d = yv * (g - dot);
        }
    }
    dx
}

/// Layer normalization cache: standardized input and per-row inverse std.
pub struct LayerNormCache {
    pub normalized: Tensor,
    pub inv_std: Vec<f64>,
}

pub const LAYER_NORM_EPS: f64 = 1e-12;

/// Standardizes each row over the last dimension, then applies `gain`, `bias`.
pub fn layer_norm(
    x: &Tensor,
    gain: &Tensor,
    bias: &Tensor,
    eps: f64,
) -> Result<(Tensor, LayerNormCache), NumericsError> {
    let d = x.last_dim();
    if gain.len() != d || bias.len() != d {
        return Err(NumericsError::Shape {
            op: "layer_norm",
            left: x.shape().to_vec(),
            right: gain.shape().to_vec(),
        });
    }
    let mut out = Tensor::zeros(x.shape());
    let mut normalized = Tensor::zeros(x.shape());
    let mut inv_std = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let row = x.row(i);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let r = 1.0 / (var + eps).sqrt();
        inv_std.push(r);
        let nrow = normalized.row_mut(i);
        for (n, &v) in nrow.iter_mut().zip(row) {
            *n = (v - mean) * r;
        }
        let nrow = normalized.row(i).to_vec();
        for (j, o) in out.row_mut(i).iter_mut().enumerate() {
            *o = gain.data()[j] * nrow[j] + bias.data()[j];
        }
    }
    Ok((out, LayerNormCache { normalized, inv_std }))
}

/// Returns `(dx, dgain, dbias)`.
pub fn layer_norm_backward(
    cache: &LayerNormCache,
    gain: &Tensor,
    dy: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let xhat = &cache.normalized;
    let d = xhat.last_dim();
    let mut dx = Tensor::zeros(xhat.shape());
    let mut dgain = vec![0.0; d];
    let mut dbias = vec![0.0; d];
    let mut dxhat = vec![0.0; d];
    for i in 0..xhat.rows() {
        let (xr, dyr) = (xhat.row(i), dy.row(i));
        let mut sum_dxhat = 0.0;
        let mut sum_dxhat_xhat = 0.0;
        for j in 0..d {
            dgain[j] += dyr[j] * xr[j];
            dbias[j] += dyr[j];
            dxhat[j] = dyr[j] * gain.data()[j];
            sum_dxhat += dxhat[j];
            sum_dxhat_xhat += dxhat[j] * xr[j];
        }
        let scale = cache.inv_std[i] / d as f64;
        for (j, o) in dx.row_mut(i).iter_mut().enumerate() {
            *o = scale * (d as f64 * dxhat[j] - sum_dxhat - xr[j] * sum_dxhat_xhat);
        }
    }
    (
        dx,
        Tensor::new(gain.shape().to_vec(), dgain).expect("gain shape"),
        Tensor::new(gain.shape().to_vec(), dbias).expect("gain shape"),
    )
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Exact GELU, `x·Φ(x)`.
pub fn gelu(x: &Tensor) -> Tensor {
    x.map(|v| v * normal_cdf(v))
}

pub fn gelu_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    x.zip_map(dy, |v, g| g * (normal_cdf(v) + v * normal_pdf(v)))
}

/// Mean negative log-likelihood of `targets` under row-wise softmax of
/// `logits`. Also returns the probabilities for the backward pass.
pub fn cross_entropy(logits: &Tensor, targets: &[usize]) -> Result<(f64, Tensor), NumericsError> {
    let (m, c) = (logits.rows(), logits.cols());
    if targets.len() != m {
        return Err(NumericsError::Shape {
            op: "cross_entropy",
            left: logits.shape().to_vec(),
            right: vec![targets.len()],
        });
    }
    if let Some((row, &target)) = targets.iter().enumerate().find(|(_, &t)| t >= c) {
        return Err(NumericsError::TargetOutOfRange {
            row,
            target,
            classes: c,
        });
    }
    let mut loss = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[t];
    }
    Ok((loss / m as f64, softmax_rows(logits)))
}

pub fn cross_entropy_backward(probs: &Tensor, targets: &[usize], dloss: f64) -> Tensor {
    let m = probs.rows() as f64;
    let mut d = probs.clone();
    for (i, &t) in targets.iter().enumerate() {
        d.row_mut(i)[t] -= 1.0;
    }
    d.map(|v| v * dloss / m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_row_stays_uniform() {
        let x = Tensor::from_rows(&[[3.0; 5]]).unwrap();
        for &p in softmax_rows(&x).data() {
            assert_eq!(p, 0.2);
        }
    }

    #[test]
    fn large_negative_entry() {
        let x = Tensor::from_rows(&[[0.0, -1e6]]).unwrap();
        let y = softmax_rows(&x);
        assert_eq!(y.data(), &[1.0, 0.0]);
        assert_eq!(y.sum(), 1.0);
    }

    #[test]
    fn all_ones_mask_is_bitwise_softmax() {
        let x = Tensor::from_rows(&[[0.3, -1.2, 2.5], [1.0, 1.0, -4.0]]).unwrap();
        let m = BitMatrix::filled(2, 3, true);
        assert_eq!(masked_softmax_rows(&x, &m).unwrap(), softmax_rows(&x));
    }

    #[test]
    fn unit_row_mask_gives_one_hot() {
        let x = Tensor::from_rows(&[[9.0, -3.0, 2.0], [0.0, 50.0, 1.0], [7.0, 7.0, 7.0]]).unwrap();
        let y = masked_softmax_rows(&x, &BitMatrix::identity(3)).unwrap();
        assert_eq!(y, Tensor::identity(3));
    }

    #[test]
    fn empty_mask_row_rejected() {
        let x = Tensor::zeros(&[2, 2]);
        let mut m = BitMatrix::identity(2);
        m.set(1, 1, false);
        assert!(matches!(
            masked_softmax_rows(&x, &m),
            Err(NumericsError::EmptyMaskRow { row: 1 })
        ));
    }

    #[test]
    fn layer_norm_constant_and_standard() {
        let one = Tensor::vector(vec![1.0, 1.0]);
        let zero = Tensor::vector(vec![0.0, 0.0]);
        let (y, _) = layer_norm(&Tensor::vector(vec![4.0, 4.0]), &one, &zero, LAYER_NORM_EPS).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0]);
        let (y, _) = layer_norm(&Tensor::vector(vec![1.0, -1.0]), &one, &zero, LAYER_NORM_EPS).unwrap();
        assert!((y.data()[0] - 1.0).abs() < 1e-11 && (y.data()[1] + 1.0).abs() < 1e-11);
    }

    #[test]
    fn gelu_values() {
        let y = gelu(&Tensor::vector(vec![0.0, 40.0, -40.0, 1.0]));
        assert_eq!(y.data()[0], 0.0);
        assert_eq!(y.data()[1], 40.0);
        assert!(y.data()[2].abs() < 1e-300);
        assert!((y.data()[3] - 0.841_344_746_068_542_9).abs() < 1e-15);
        let xs: Vec<f64> = (-30..=30).map(|k| k as f64 * 0.1).collect();
        let ys = gelu(&Tensor::vector(xs));
        // increasing right of the minimum near -0.75
        for w in ys.data()[23..].windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn cross_entropy_values() {
        let (l, _) = cross_entropy(&Tensor::zeros(&[3, 4]), &[0, 1, 3]).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-15);
        let (l, _) = cross_entropy(&Tensor::from_rows(&[[50.0, 0.0, 0.0]]).unwrap(), &[0]).unwrap();
        assert!(l < 1e-20);
        assert!(matches!(
            cross_entropy(&Tensor::zeros(&[1, 2]), &[2]),
            Err(NumericsError::TargetOutOfRange { .. })
        ));
    }
}
