//! Dense row-major tensors in double precision.
//!
//! Everything in this repository is tiny (history length 36, hidden size 128),
//! so a flat `Vec<f64>` with explicit shape metadata is all we need. Every
//! operation checks that its output is finite; NaN or infinity anywhere is a
//! hard error rather than a silent propagation.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} implies {} elements, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        let t = Tensor { shape, data };
        t.check_finite("new")?;
        Ok(t)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Scalar value; errors if the tensor holds more than one element.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(Error::Shape(format!(
                "item() on tensor of shape {:?}",
                self.shape
            )))
        }
    }

    pub fn rows(&self) -> Result<usize> {
        match self.shape.as_slice() {
            [r, _] => Ok(*r),
            _ => Err(Error::Shape(format!("not a matrix: {:?}", self.shape))),
        }
    }

    pub fn cols(&self) -> Result<usize> {
        match self.shape.as_slice() {
            [_, c] => Ok(*c),
            _ => Err(Error::Shape(format!("not a matrix: {:?}", self.shape))),
        }
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        let cols = self.shape[1];
        self.data[row * cols + col]
    }

    /// Copy of row `i` of a matrix as a vector.
    pub fn row(&self, i: usize) -> Result<Tensor> {
        let (r, c) = (self.rows()?, self.cols()?);
        if i >= r {
            return Err(Error::Shape(format!("row {} out of {}", i, r)));
        }
        Ok(Tensor::vector(self.data[i * c..(i + 1) * c].to_vec()))
    }

    /// Copy of column `j` of a matrix as a vector.
    pub fn column(&self, j: usize) -> Result<Tensor> {
        let (r, c) = (self.rows()?, self.cols()?);
        if j >= c {
            return Err(Error::Shape(format!("column {} out of {}", j, c)));
        }
        Ok(Tensor::vector((0..r).map(|i| self.data[i * c + j]).collect()))
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        for (i, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite value {} at index {} in {}",
                    v, i, context
                )));
            }
        }
        Ok(())
    }
}

fn same_shape(a: &Tensor, b: &Tensor, op: &str) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::Shape(format!(
            "{}: shape {:?} vs {:?}",
            op, a.shape, b.shape
        )));
    }
    Ok(())
}

/// Matrix product of `a` (m x k) and `b` (k x n).
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = (a.rows()?, a.cols()?);
    let (k2, n) = (b.rows()?, b.cols()?);
    if k != k2 {
        return Err(Error::Shape(format!(
            "matmul: inner dimensions {} vs {}",
            k, k2
        )));
    }
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for l in 0..k {
            let av = a.data[i * k + l];
            let brow = &b.data[l * n..(l + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
    let t = Tensor {
        shape: vec![m, n],
        data: out,
    };
    t.check_finite("matmul")?;
    Ok(t)
}

/// Matrix (m x n) times vector (n), yielding a vector (m).
pub fn matvec(a: &Tensor, x: &Tensor) -> Result<Tensor> {
    let (m, n) = (a.rows()?, a.cols()?);
    if x.shape.as_slice() != [n] {
        return Err(Error::Shape(format!(
            "matvec: matrix cols {} vs vector shape {:?}",
            n, x.shape
        )));
    }
    let mut out = vec![0.0; m];
    for i in 0..m {
        let row = &a.data[i * n..(i + 1) * n];
        out[i] = row.iter().zip(&x.data).map(|(w, v)| w * v).sum();
    }
    let t = Tensor::vector(out);
    t.check_finite("matvec")?;
    Ok(t)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape(a, b, "add")?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
    let t = Tensor {
        shape: a.shape.clone(),
        data,
    };
    t.check_finite("add")?;
    Ok(t)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape(a, b, "sub")?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x - y).collect();
    let t = Tensor {
        shape: a.shape.clone(),
        data,
    };
    t.check_finite("sub")?;
    Ok(t)
}

/// Hadamard (elementwise) product.
pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape(a, b, "mul")?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    let t = Tensor {
        shape: a.shape.clone(),
        data,
    };
    t.check_finite("mul")?;
    Ok(t)
}

pub fn scale(a: &Tensor, s: f64) -> Result<Tensor> {
    let data = a.data.iter().map(|x| x * s).collect();
    let t = Tensor {
        shape: a.shape.clone(),
        data,
    };
    t.check_finite("scale")?;
    Ok(t)
}

pub fn tanh(a: &Tensor) -> Result<Tensor> {
    let data = a.data.iter().map(|x| x.tanh()).collect();
    Ok(Tensor {
        shape: a.shape.clone(),
        data,
    })
}

pub fn sigmoid(a: &Tensor) -> Result<Tensor> {
    let data = a.data.iter().map(|x| sigmoid_scalar(*x)).collect();
    Ok(Tensor {
        shape: a.shape.clone(),
        data,
    })
}

pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of a vector (max subtraction).
pub fn softmax(v: &Tensor) -> Result<Tensor> {
    if v.is_empty() {
        return Err(Error::Shape("softmax: empty input".into()));
    }
    let max = v.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.data.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let t = Tensor {
        shape: v.shape.clone(),
        data: exps.into_iter().map(|e| e / sum).collect(),
    };
    t.check_finite("softmax")?;
    Ok(t)
}

pub fn dot(a: &Tensor, b: &Tensor) -> Result<f64> {
    same_shape(a, b, "dot")?;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matmul_identity() {
        let a = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let i = Tensor::identity(2);
        let out = matmul(&i, &a).unwrap();
        for (x, y) in out.data().iter().zip(a.data()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn matmul_zero() {
        let a = Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap();
        let z = Tensor::matrix(2, 1, vec![0.0, 0.0]).unwrap();
        assert_eq!(matmul(&a, &z).unwrap().data(), &[0.0]);
    }

    #[test]
    fn matmul_hand_example() {
        // [[1,2],[3,4]] x [[5],[6]] = [[17],[39]]
        let a = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::matrix(2, 1, vec![5.0, 6.0]).unwrap();
        assert_eq!(matmul(&a, &b).unwrap().data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_dimension_mismatch() {
        let a = Tensor::matrix(2, 2, vec![1.0; 4]).unwrap();
        let b = Tensor::matrix(3, 1, vec![1.0; 3]).unwrap();
        assert!(matches!(matmul(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn softmax_uniform() {
        let out = softmax(&Tensor::vector(vec![0.0, 0.0, 0.0])).unwrap();
        for v in out.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_large_inputs_stable() {
        let out = softmax(&Tensor::vector(vec![1000.0, 1000.0])).unwrap();
        assert!((out.data()[0] - 0.5).abs() < 1e-15);
        assert!((out.data()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn softmax_closed_form() {
        let v = Tensor::vector(vec![1f64.ln(), 2f64.ln(), 3f64.ln()]);
        let out = softmax(&v).unwrap();
        let expect = [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0];
        for (o, e) in out.data().iter().zip(expect) {
            assert!((o - e).abs() < 1e-14);
        }
    }

    #[test]
    fn softmax_empty_is_error() {
        assert!(matches!(
            softmax(&Tensor::vector(vec![])),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn elementwise_examples() {
        assert_eq!(tanh(&Tensor::scalar(0.0)).unwrap().item().unwrap(), 0.0);
        assert_eq!(sigmoid(&Tensor::scalar(0.0)).unwrap().item().unwrap(), 0.5);
        let out = mul(
            &Tensor::vector(vec![1.0, 2.0]),
            &Tensor::vector(vec![3.0, 4.0]),
        )
        .unwrap();
        assert_eq!(out.data(), &[3.0, 8.0]);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(Tensor::new(vec![1], vec![f64::NAN]).is_err());
        let big = Tensor::vector(vec![1e308, 1e308]);
        assert!(matches!(add(&big, &big), Err(Error::Numeric(_))));
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(xs in proptest::collection::vec(-50.0..50.0f64, 1..20)) {
            let out = softmax(&Tensor::vector(xs)).unwrap();
            let sum: f64 = out.data().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            for v in out.data() {
                prop_assert!(*v > 0.0 && *v < 1.0 + 1e-12);
            }
        }

        #[test]
        fn matmul_identity_exact(n in 1usize..6, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let a = Tensor::matrix(n, n, data).unwrap();
            let out = matmul(&Tensor::identity(n), &a).unwrap();
            for (x, y) in out.data().iter().zip(a.data()) {
                prop_assert!((x - y).abs() < 1e-15);
            }
        }
    }
}
