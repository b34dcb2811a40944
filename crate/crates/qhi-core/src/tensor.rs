//! Dense complex tensors with explicit axis contraction.
//!
//! Minimal on purpose: the state-sum networks here involve a handful of
//! rank-4 tensors, so a flat row-major buffer plus an index walker beats
//! pulling in an n-d array dependency. Summation order is fixed by the
//! iteration order, which keeps contraction results bit-stable.

use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<C64>,
}

impl Tensor {
    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        Tensor {
            dims: dims.to_vec(),
            data: vec![C64::new(0.0, 0.0); len],
        }
    }

    pub fn scalar(v: C64) -> Self {
        Tensor {
            dims: vec![],
            data: vec![v],
        }
    }

    pub fn from_data(dims: &[usize], data: Vec<C64>) -> Self {
        assert_eq!(dims.iter().product::<usize>(), data.len());
        Tensor {
            dims: dims.to_vec(),
            data,
        }
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        for (i, d) in idx.iter().zip(&self.dims) {
            debug_assert!(i < d);
            off = off * d + i;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: C64) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    pub fn scale(&mut self, v: C64) {
        for x in &mut self.data {
            *x *= v;
        }
    }

    /// Scalar value of a rank-0 tensor.
    pub fn into_scalar(self) -> C64 {
        assert!(self.dims.is_empty(), "tensor of rank {} is not a scalar", self.rank());
        self.data[0]
    }

    /// Contract `a` and `b` along the listed axis pairs
    /// (`a_axes[t]` with `b_axes[t]`, equal extents required).
    ///
    /// Result axes: the free axes of `a` in order, then the free axes of
    /// `b` in order. Summation runs in row-major order of the bound
    /// multi-index, so results are deterministic.
    pub fn contract(a: &Tensor, a_axes: &[usize], b: &Tensor, b_axes: &[usize]) -> Tensor {
        assert_eq!(a_axes.len(), b_axes.len(), "axis list length mismatch");
        for (&ax, &bx) in a_axes.iter().zip(b_axes) {
            assert_eq!(
                a.dims[ax], b.dims[bx],
                "contracted extents differ on axes {ax}/{bx}"
            );
        }

        let a_free: Vec<usize> = (0..a.rank()).filter(|i| !a_axes.contains(i)).collect();
        let b_free: Vec<usize> = (0..b.rank()).filter(|i| !b_axes.contains(i)).collect();
        let bound_dims: Vec<usize> = a_axes.iter().map(|&i| a.dims[i]).collect();

        let mut out_dims: Vec<usize> = a_free.iter().map(|&i| a.dims[i]).collect();
        out_dims.extend(b_free.iter().map(|&i| b.dims[i]));
        let mut out = Tensor::zeros(&out_dims);

        // Strides of the full input tensors.
        let strides = |dims: &[usize]| -> Vec<usize> {
            let mut s = vec![1usize; dims.len()];
            for i in (0..dims.len().saturating_sub(1)).rev() {
                s[i] = s[i + 1] * dims[i + 1];
            }
            s
        };
        let sa = strides(&a.dims);
        let sb = strides(&b.dims);

        let a_free_dims: Vec<usize> = a_free.iter().map(|&i| a.dims[i]).collect();
        let b_free_dims: Vec<usize> = b_free.iter().map(|&i| b.dims[i]).collect();

        let mut out_off = 0usize;
        let mut ia = vec![0usize; a_free.len()];
        loop {
            let a_base: usize = ia
                .iter()
                .zip(&a_free)
                .map(|(&v, &ax)| v * sa[ax])
                .sum();
            let mut ib = vec![0usize; b_free.len()];
            loop {
                let b_base: usize = ib
                    .iter()
                    .zip(&b_free)
                    .map(|(&v, &bx)| v * sb[bx])
                    .sum();

                let mut acc = C64::new(0.0, 0.0);
                let mut k = vec![0usize; bound_dims.len()];
                loop {
                    let a_off: usize = a_base
                        + k.iter()
                            .zip(a_axes)
                            .map(|(&v, &ax)| v * sa[ax])
                            .sum::<usize>();
                    let b_off: usize = b_base
                        + k.iter()
                            .zip(b_axes)
                            .map(|(&v, &bx)| v * sb[bx])
                            .sum::<usize>();
                    acc += a.data[a_off] * b.data[b_off];
                    if !incr(&mut k, &bound_dims) {
                        break;
                    }
                }
                out.data[out_off] = acc;
                out_off += 1;
                if !incr(&mut ib, &b_free_dims) {
                    break;
                }
            }
            if !incr(&mut ia, &a_free_dims) {
                break;
            }
        }
        out
    }

    /// Trace over two axes of one tensor (equal extents), removing both.
    pub fn self_trace(&self, ax1: usize, ax2: usize) -> Tensor {
        assert_ne!(ax1, ax2);
        assert_eq!(self.dims[ax1], self.dims[ax2]);
        let d = self.dims[ax1];
        let free: Vec<usize> = (0..self.rank()).filter(|&i| i != ax1 && i != ax2).collect();
        let out_dims: Vec<usize> = free.iter().map(|&i| self.dims[i]).collect();
        let mut out = Tensor::zeros(&out_dims);
        let mut idx = vec![0usize; free.len()];
        let mut full = vec![0usize; self.rank()];
        let mut off = 0usize;
        loop {
            for (pos, &ax) in free.iter().enumerate() {
                full[ax] = idx[pos];
            }
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..d {
                full[ax1] = t;
                full[ax2] = t;
                acc += self.get(&full);
            }
            out.data[off] = acc;
            off += 1;
            if !incr(&mut idx, &out_dims) {
                break;
            }
        }
        out
    }
}

/// Advance a row-major multi-index; false once it wraps to all zeros.
fn incr(idx: &mut [usize], dims: &[usize]) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < dims[i] {
            return true;
        }
        idx[i] = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn matrix_product_via_contract() {
        // [[1,2],[3,4]] * [[5,6],[7,8]] = [[19,22],[43,50]]
        let a = Tensor::from_data(&[2, 2], vec![c(1., 0.), c(2., 0.), c(3., 0.), c(4., 0.)]);
        let b = Tensor::from_data(&[2, 2], vec![c(5., 0.), c(6., 0.), c(7., 0.), c(8., 0.)]);
        let p = Tensor::contract(&a, &[1], &b, &[0]);
        assert_eq!(p.dims(), &[2, 2]);
        assert_eq!(p.get(&[0, 0]).re, 19.0);
        assert_eq!(p.get(&[0, 1]).re, 22.0);
        assert_eq!(p.get(&[1, 0]).re, 43.0);
        assert_eq!(p.get(&[1, 1]).re, 50.0);
    }

    #[test]
    fn contract_to_scalar_is_trace_of_product() {
        let a = Tensor::from_data(&[2, 2], vec![c(1., 0.), c(2., 0.), c(3., 0.), c(4., 0.)]);
        let b = Tensor::from_data(&[2, 2], vec![c(5., 0.), c(6., 0.), c(7., 0.), c(8., 0.)]);
        // tr(a*b) = 19 + 50 = 69 contracts both axis pairs at once.
        let s = Tensor::contract(&a, &[1, 0], &b, &[0, 1]);
        assert_eq!(s.rank(), 0);
        assert_eq!(s.into_scalar().re, 69.0);
    }

    #[test]
    fn self_trace_matches_manual_sum() {
        let mut t = Tensor::zeros(&[2, 3, 2]);
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..2 {
                    t.set(&[i, j, k], c((i * 100 + j * 10 + k) as f64, 0.0));
                }
            }
        }
        let tr = t.self_trace(0, 2);
        assert_eq!(tr.dims(), &[3]);
        for j in 0..3 {
            // entries (0,j,0) + (1,j,1)
            let want = (j * 10) as f64 + (100 + j * 10 + 1) as f64;
            assert_eq!(tr.get(&[j]).re, want);
        }
    }
}
