//! Banded LU with partial pivoting for the truncated Hamiltonian.
//!
//! Rows are stored as dense slices over an absolute column range that grows
//! on fill-in, so swapped rows keep their own coverage.

/// `a + b = s + e` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[derive(Clone, Debug)]
struct Row {
    start: usize,
    vals: Vec<f64>,
}

impl Row {
    fn get(&self, c: usize) -> f64 {
        if c < self.start {
            return 0.0;
        }
        self.vals.get(c - self.start).copied().unwrap_or(0.0)
    }

    fn end(&self) -> usize {
        self.start + self.vals.len()
    }

    fn cover(&mut self, lo: usize, hi: usize) {
        if lo < self.start {
            let mut vals = vec![0.0; self.start - lo];
            vals.extend_from_slice(&self.vals);
            self.vals = vals;
            self.start = lo;
        }
        if hi > self.end() {
            self.vals.resize(hi - self.start, 0.0);
        }
    }

    fn add(&mut self, c: usize, x: f64) {
        self.cover(c, c + 1);
        self.vals[c - self.start] += x;
    }
}

/// Sparse-row matrix with bounded lower bandwidth, factorized in place.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    rows: Vec<Row>,
}

#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    /// Upper factor rows; row `i` starts at column `i`.
    upper: Vec<Row>,
    /// `lower[i]`: `(row, multiplier)` pairs eliminated by pivot `i`.
    lower: Vec<Vec<(usize, f64)>>,
    /// Row swapped into position `i` before eliminating column `i`.
    swaps: Vec<usize>,
}

impl BandedMatrix {
    pub fn zeros(n: usize) -> Self {
        BandedMatrix { n, rows: (0..n).map(|i| Row { start: i, vals: Vec::new() }).collect() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, i: usize, j: usize, x: f64) {
        self.rows[i].add(j, x);
    }

    /// Adds `x` and returns the rounding error of the stored sum.
    pub fn add_exact(&mut self, i: usize, j: usize, x: f64) -> f64 {
        let row = &mut self.rows[i];
        row.cover(j, j + 1);
        let slot = &mut row.vals[j - row.start];
        let (s, e) = two_sum(*slot, x);
        *slot = s;
        e
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].get(j)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(i, r)| r.vals.iter().enumerate().all(|(k, a)| self.get(r.start + k, i) == *a))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.vals.iter().enumerate().map(|(k, a)| a * x[r.start + k]).sum()).collect()
    }

    /// `b − (self + lo)x` accumulated in double-double arithmetic.
    pub fn residual(&self, lo: &BandedMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (mut hi, mut err) = (b[i], 0.0);
                for row in [&self.rows[i], &lo.rows[i]] {
                    for (k, a) in row.vals.iter().enumerate() {
                        let p = -a * x[row.start + k];
                        let pe = (-a).mul_add(x[row.start + k], -p);
                        let (s, e) = two_sum(hi, p);
                        hi = s;
                        err += e + pe;
                    }
                }
                hi + err
            })
            .collect()
    }

    /// LU factorization; `None` when a pivot column is numerically zero.
    pub fn factor(&self) -> Option<BandedLu> {
        let n = self.n;
        let mut rows = self.rows.clone();
        let scale = rows.iter().flat_map(|r| r.vals.iter()).fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        // Rows reaching below the diagonal; a row can only start left of its
        // index, so the candidates for pivot column i are rows whose start ≤ i.
        let lower_reach = rows.iter().enumerate().map(|(i, r)| i - r.start.min(i)).max().unwrap_or(0);
        let mut lower = vec![Vec::new(); n];
        let mut swaps = vec![0; n];
        for i in 0..n {
            let last = (i + lower_reach).min(n - 1);
            let p = (i..=last)
                .max_by(|&a, &b| rows[a].get(i).abs().total_cmp(&rows[b].get(i).abs()))
                .expect("non-empty range");
            if rows[p].get(i).abs() <= 1e-14 * scale {
                return None;
            }
            rows.swap(i, p);
            swaps[i] = p;
            let pivot_row = rows[i].clone();
            let pivot = pivot_row.get(i);
            for r in i + 1..=last {
                let a = rows[r].get(i);
                if a == 0.0 {
                    continue;
                }
                let l = a / pivot;
                let row = &mut rows[r];
                row.cover(i, pivot_row.end());
                for c in i..pivot_row.end() {
                    let u = pivot_row.get(c);
                    if u != 0.0 {
                        row.vals[c - row.start] -= l * u;
                    }
                }
                row.vals[i - row.start] = 0.0;
                lower[i].push((r, l));
            }
        }
        let upper = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let vals = (i..r.end().max(i + 1)).map(|c| r.get(c)).collect();
                Row { start: i, vals }
            })
            .collect();
        Some(BandedLu { n, upper, lower, swaps })
    }
}

impl BandedLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "right-hand side length");
        let mut y = b.to_vec();
        for i in 0..self.n {
            y.swap(i, self.swaps[i]);
            let yi = y[i];
            for &(r, l) in &self.lower[i] {
                y[r] -= l * yi;
            }
        }
        let mut x = vec![0.0; self.n];
        for i in (0..self.n).rev() {
            let row = &self.upper[i];
            let mut acc = y[i];
            for (k, u) in row.vals.iter().enumerate().skip(1) {
                acc -= u * x[i + k];
            }
            x[i] = acc / row.vals[0];
        }
        x
    }
}
