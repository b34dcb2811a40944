//! Dense integer linear algebra on small matrices: Smith normal form,
//! exact determinants, and lattice solves.  Sizes here stay in the tens,
//! so everything is straightforward row/column reduction in i64.

/// Smith decomposition `u * a * v = d` with all four transforms kept,
/// since quotient bases need rows of `v_inv` and solves need `u` and `v`.
pub struct Smith {
    pub u: Vec<Vec<i64>>,
    pub u_inv: Vec<Vec<i64>>,
    pub v: Vec<Vec<i64>>,
    pub v_inv: Vec<Vec<i64>>,
    pub d: Vec<Vec<i64>>,
    pub rank: usize,
}

/// Solution set of `a x = b` over the integers: one particular solution
/// plus a basis of the integer kernel of `a`.
pub struct LatticeSolution {
    pub particular: Vec<i64>,
    pub null_basis: Vec<Vec<i64>>,
}

/// Fraction-free determinant (Bareiss).  Panics on non-square input.
pub fn bareiss_det(a: &[Vec<i64>]) -> i64 {
    let n = a.len();
    assert!(a.iter().all(|r| r.len() == n), "determinant of non-square");
    if n == 0 {
        return 1;
    }
    let mut m: Vec<Vec<i128>> = a
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if m[k][k] == 0 {
            let swap = (k + 1..n).find(|&i| m[i][k] != 0);
            match swap {
                Some(i) => {
                    m.swap(k, i);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
            }
            m[i][k] = 0;
        }
        prev = m[k][k];
    }
    (sign * m[n - 1][n - 1]) as i64
}

struct Reducer {
    d: Vec<Vec<i64>>,
    u: Vec<Vec<i64>>,
    u_inv: Vec<Vec<i64>>,
    v: Vec<Vec<i64>>,
    v_inv: Vec<Vec<i64>>,
}

impl Reducer {
    fn swap_rows(&mut self, a: usize, b: usize) {
        self.d.swap(a, b);
        self.u.swap(a, b);
        for row in &mut self.u_inv {
            row.swap(a, b);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        for row in &mut self.d {
            row.swap(a, b);
        }
        for row in &mut self.v {
            row.swap(a, b);
        }
        self.v_inv.swap(a, b);
    }

    fn negate_row(&mut self, a: usize) {
        for x in &mut self.d[a] {
            *x = -*x;
        }
        for x in &mut self.u[a] {
            *x = -*x;
        }
        for row in &mut self.u_inv {
            row[a] = -row[a];
        }
    }

    /// row[dst] += k * row[src]
    fn add_row(&mut self, dst: usize, src: usize, k: i64) {
        for j in 0..self.d[dst].len() {
            self.d[dst][j] += k * self.d[src][j];
        }
        for j in 0..self.u[dst].len() {
            self.u[dst][j] += k * self.u[src][j];
        }
        for row in &mut self.u_inv {
            row[src] -= k * row[dst];
        }
    }

    /// col[dst] += k * col[src]
    fn add_col(&mut self, dst: usize, src: usize, k: i64) {
        for row in &mut self.d {
            row[dst] += k * row[src];
        }
        for row in &mut self.v {
            row[dst] += k * row[src];
        }
        for j in 0..self.v_inv[src].len() {
            let t = k * self.v_inv[dst][j];
            self.v_inv[src][j] -= t;
        }
    }
}

/// Smith normal form with the divisibility chain d_1 | d_2 | ... and
/// nonnegative diagonal.
pub fn smith(a: &[Vec<i64>]) -> Smith {
    let m = a.len();
    let n = if m == 0 { 0 } else { a[0].len() };
    let ident = |k: usize| -> Vec<Vec<i64>> {
        let mut id = vec![vec![0i64; k]; k];
        for (i, row) in id.iter_mut().enumerate() {
            row[i] = 1;
        }
        id
    };
    let mut r = Reducer {
        d: a.to_vec(),
        u: ident(m),
        u_inv: ident(m),
        v: ident(n),
        v_inv: ident(n),
    };

    let mut t = 0usize;
    while t < m.min(n) {
        // pick the nonzero entry of smallest magnitude in the trailing block
        let mut best: Option<(usize, usize)> = None;
        for i in t..m {
            for j in t..n {
                if r.d[i][j] != 0
                    && best.is_none_or(|(bi, bj)| r.d[i][j].abs() < r.d[bi][bj].abs())
                {
                    best = Some((i, j));
                }
            }
        }
        let Some((bi, bj)) = best else { break };
        r.swap_rows(t, bi);
        r.swap_cols(t, bj);

        // clear row and column t; restart if a remainder produced a smaller
        // candidate elsewhere in the pivot line
        loop {
            let mut dirty = false;
            for i in t + 1..m {
                if r.d[i][t] != 0 {
                    let k = div_round(r.d[i][t], r.d[t][t]);
                    r.add_row(i, t, -k);
                    if r.d[i][t] != 0 {
                        r.swap_rows(t, i);
                        dirty = true;
                    }
                }
            }
            for j in t + 1..n {
                if r.d[t][j] != 0 {
                    let k = div_round(r.d[t][j], r.d[t][t]);
                    r.add_col(j, t, -k);
                    if r.d[t][j] != 0 {
                        r.swap_cols(t, j);
                        dirty = true;
                    }
                }
            }
            if !dirty {
                break;
            }
        }

        // enforce divisibility: pivot must divide every trailing entry
        let mut offender = None;
        'scan: for i in t + 1..m {
            for j in t + 1..n {
                if r.d[i][j] % r.d[t][t] != 0 {
                    offender = Some(i);
                    break 'scan;
                }
            }
        }
        if let Some(i) = offender {
            r.add_row(t, i, 1);
            continue; // redo this pivot with the fresh row mixed in
        }
        if r.d[t][t] < 0 {
            r.negate_row(t);
        }
        t += 1;
    }

    let rank = (0..m.min(n)).filter(|&i| r.d[i][i] != 0).count();
    Smith {
        u: r.u,
        u_inv: r.u_inv,
        v: r.v,
        v_inv: r.v_inv,
        d: r.d,
        rank,
    }
}

fn div_round(a: i64, b: i64) -> i64 {
    // round-to-nearest quotient keeps remainders at most |b|/2
    let q = a / b;
    let rem = a - q * b;
    if 2 * rem.abs() > b.abs() {
        q + if (rem > 0) == (b > 0) { 1 } else { -1 }
    } else {
        q
    }
}

/// Solve `a x = b` over the integers.  Returns None when no integer
/// solution exists (including rational-only cases).
pub fn solve_linear(a: &[Vec<i64>], b: &[i64]) -> Option<LatticeSolution> {
    let m = a.len();
    assert_eq!(b.len(), m);
    let n = if m == 0 { 0 } else { a[0].len() };
    let s = smith(a);
    // U A V = D, so with x = V y the system reads D y = U b.
    let ub: Vec<i64> = s
        .u
        .iter()
        .map(|row| (0..m).map(|j| row[j] * b[j]).sum())
        .collect();
    let mut y = vec![0i64; n];
    for i in 0..m {
        let di = if i < n { s.d[i][i] } else { 0 };
        if di == 0 {
            if ub[i] != 0 {
                return None;
            }
        } else {
            if ub[i] % di != 0 {
                return None;
            }
            y[i] = ub[i] / di;
        }
    }
    let particular: Vec<i64> = (0..n)
        .map(|i| (0..n).map(|j| s.v[i][j] * y[j]).sum())
        .collect();
    let null_basis: Vec<Vec<i64>> = (s.rank..n)
        .map(|j| (0..n).map(|i| s.v[i][j]).collect())
        .collect();
    Some(LatticeSolution {
        particular,
        null_basis,
    })
}
