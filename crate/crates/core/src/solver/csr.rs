/// Compressed sparse rows.
#[derive(Clone, Debug)]
pub(crate) struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// From triplets sorted by `(row, col)` without repeats.
    pub fn from_sorted(nrows: usize, ncols: usize, trip: &[(usize, usize, f64)]) -> Csr {
        let mut row_ptr = vec![0; nrows + 1];
        for &(r, _, _) in trip {
            row_ptr[r + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr {
            nrows,
            ncols,
            row_ptr,
            cols: trip.iter().map(|t| t.1).collect(),
            vals: trip.iter().map(|t| t.2).collect(),
        }
    }

    pub fn row_range(&self, i: usize) -> (usize, usize) {
        (self.row_ptr[i], self.row_ptr[i + 1])
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        self.mul_into(x, &mut out);
        out
    }

    pub fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (lo, hi) = self.row_range(i);
            *o = (lo..hi).map(|p| self.vals[p] * x[self.cols[p]]).sum();
        }
    }

    pub fn mul_t(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        self.mul_t_into(y, &mut out);
        out
    }

    pub fn mul_t_into(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            let (lo, hi) = self.row_range(i);
            for p in lo..hi {
                out[self.cols[p]] += self.vals[p] * yi;
            }
        }
    }
}
