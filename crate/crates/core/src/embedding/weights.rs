use std::sync::atomic::{AtomicU32, Ordering};

/// Row-major `f32` matrix that tolerates unsynchronized concurrent updates.
///
/// Each element is an `AtomicU32` holding the float's bits, accessed with
/// relaxed ordering. Concurrent writers may lose each other's updates (the
/// usual lock-free SGD trade-off) but never observe torn values. With a
/// single writer the arithmetic is identical to a plain `Vec<f32>`.
#[derive(Debug)]
pub(crate) struct SharedMatrix {
    data: Vec<AtomicU32>,
    cols: usize,
}

impl SharedMatrix {
    pub fn from_vec(values: Vec<f32>, cols: usize) -> Self {
        debug_assert!(cols > 0 && values.len() % cols == 0);
        SharedMatrix {
            data: values.into_iter().map(|v| AtomicU32::new(v.to_bits())).collect(),
            cols,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_vec(vec![0.0; rows * cols], cols)
    }

    #[inline]
    fn cell(&self, row: usize, col: usize) -> &AtomicU32 {
        &self.data[row * self.cols + col]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        f32::from_bits(self.cell(row, col).load(Ordering::Relaxed))
    }

    #[cfg(test)]
    pub fn read_row(&self, row: usize, out: &mut [f32]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.get(row, c);
        }
    }

    /// `out += scale * row`
    pub fn accumulate_row(&self, row: usize, scale: f32, out: &mut [f32]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o += scale * self.get(row, c);
        }
    }

    pub fn dot_row(&self, row: usize, v: &[f32]) -> f32 {
        v.iter().enumerate().map(|(c, x)| x * self.get(row, c)).sum()
    }

    /// `row += scale * v`
    pub fn add_to_row(&self, row: usize, scale: f32, v: &[f32]) {
        for (c, x) in v.iter().enumerate() {
            let cell = self.cell(row, c);
            let cur = f32::from_bits(cell.load(Ordering::Relaxed));
            cell.store((cur + scale * x).to_bits(), Ordering::Relaxed);
        }
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
            .into_iter()
            .map(|a| f32::from_bits(a.into_inner()))
            .collect()
    }
}

/// Row access used by the PV-DM update.
pub(crate) trait RowOps: Sync {
    /// `out += scale * row`
    fn accumulate_row(&self, row: usize, scale: f32, out: &mut [f32]);
    fn dot_row(&self, row: usize, v: &[f32]) -> f32;
    /// `row += scale * v`
    fn add_to_row(&self, row: usize, scale: f32, v: &[f32]);
}

impl RowOps for SharedMatrix {
    fn accumulate_row(&self, row: usize, scale: f32, out: &mut [f32]) {
        SharedMatrix::accumulate_row(self, row, scale, out)
    }
    fn dot_row(&self, row: usize, v: &[f32]) -> f32 {
        SharedMatrix::dot_row(self, row, v)
    }
    fn add_to_row(&self, row: usize, scale: f32, v: &[f32]) {
        SharedMatrix::add_to_row(self, row, scale, v)
    }
}

/// Borrowed weights that are never written.
pub(crate) struct Frozen<'a> {
    pub data: &'a [f32],
    pub cols: usize,
}

impl RowOps for Frozen<'_> {
    fn accumulate_row(&self, row: usize, scale: f32, out: &mut [f32]) {
        let r = &self.data[row * self.cols..(row + 1) * self.cols];
        for (o, x) in out.iter_mut().zip(r) {
            *o += scale * x;
        }
    }
    fn dot_row(&self, row: usize, v: &[f32]) -> f32 {
        let r = &self.data[row * self.cols..(row + 1) * self.cols];
        r.iter().zip(v).map(|(a, b)| a * b).sum()
    }
    fn add_to_row(&self, _row: usize, _scale: f32, _v: &[f32]) {
        unreachable!("frozen weights are read-only")
    }
}
