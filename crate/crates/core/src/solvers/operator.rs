//! The generator on a box as a structured stencil over lexicographic indices.

use rayon::prelude::*;

use crate::environment::ConductanceField;
use crate::error::{domain, Result};
use crate::lattice::LatticeBox;

/// Rows per parallel task; below `PARALLEL_MIN` vertices everything runs inline.
const ROWS_PER_TASK: usize = 16;
const PARALLEL_MIN: usize = 1 << 15;

/// `L u(x) = sum_y w(x, y)(u(y) - u(x))` on the interior of a box, stored as
/// conductances divided by the uniformization rate `max_x mu(x)`.
#[derive(Clone, Debug)]
pub struct BoxOperator {
    ambient: LatticeBox,
    side: usize,
    strides: Vec<usize>,
    /// `scaled[a][i] = w(i, i + e_a) / rate`, zero where the bond leaves the box.
    scaled: Vec<Vec<f64>>,
    /// Set when every conductance is equal; the stencil then skips the arrays.
    uniform: Option<f64>,
    rate: f64,
    interior_row: Vec<bool>,
    boundary: Vec<usize>,
    /// Interior vertices next to the boundary with their summed scaled exit conductance.
    exits: Vec<(usize, f64)>,
}

impl BoxOperator {
    pub fn new(w: &ConductanceField) -> Result<BoxOperator> {
        let ambient = *w.ambient();
        if ambient.radius() == 0 {
            return Err(domain("the box has no interior vertex"));
        }
        let d = ambient.dim();
        let n = ambient.len();
        let side = ambient.side();
        let strides: Vec<usize> = (0..d).map(|a| ambient.stride(a)).collect();
        let offsets = |i: usize| -> Vec<usize> { (0..d).map(|a| (i / strides[a]) % side).collect() };

        let mut raw = vec![vec![0.0; n]; d];
        let mut common = Some(w.slot(0, 0));
        for (i, off) in (0..n).map(|i| (i, offsets(i))) {
            for a in 0..d {
                if off[a] + 1 < side {
                    raw[a][i] = w.slot(i, a);
                    if common != Some(raw[a][i]) {
                        common = None;
                    }
                }
            }
        }
        let is_interior = |off: &[usize]| off.iter().all(|&o| o >= 1 && o + 1 < side);
        let mut rate: f64 = 0.0;
        let mut boundary = Vec::new();
        for i in 0..n {
            let off = offsets(i);
            if !is_interior(&off) {
                boundary.push(i);
                continue;
            }
            let mu: f64 = (0..d).map(|a| raw[a][i] + raw[a][i - strides[a]]).sum();
            rate = rate.max(mu);
        }
        let uniform = common.map(|c| c / rate);
        let scaled: Vec<Vec<f64>> = raw
            .into_iter()
            .map(|col| col.into_iter().map(|v| v / rate).collect())
            .collect();
        let mut exits = Vec::new();
        for i in 0..n {
            let off = offsets(i);
            if !is_interior(&off) {
                continue;
            }
            let mut out = 0.0;
            for a in 0..d {
                if off[a] == 1 {
                    out += scaled[a][i - strides[a]];
                }
                if off[a] + 2 == side {
                    out += scaled[a][i];
                }
            }
            if out > 0.0 {
                exits.push((i, out));
            }
        }
        let rows = n / side;
        let interior_row = (0..rows)
            .map(|r| is_interior(&offsets(r * side)[..d - 1]))
            .collect();
        Ok(BoxOperator {
            ambient,
            side,
            strides,
            scaled,
            uniform,
            rate,
            interior_row,
            boundary,
            exits,
        })
    }

    pub fn ambient(&self) -> &LatticeBox {
        &self.ambient
    }

    pub fn len(&self) -> usize {
        self.ambient.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Uniformization rate `max_x mu(x)` over interior vertices.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Indices of the vertices on the box's interior boundary.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// Mass flowing from interior vertices to the boundary in one lazy step.
    pub(crate) fn exit_flux(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self.exits.iter().map(|&(i, c)| c * x[i]).collect();
        crate::calculus::pairwise_sum(&terms)
    }

    /// `L u` on interior vertices; boundary entries of `out` are set to zero.
    pub fn generator(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, interior) in self.interior_row.iter().enumerate() {
            if !interior {
                continue;
            }
            for i in r * self.side + 1..(r + 1) * self.side - 1 {
                out[i] = self.rate * self.local_increment(u, i);
            }
        }
    }

    #[inline]
    fn local_increment(&self, x: &[f64], i: usize) -> f64 {
        let xi = x[i];
        let mut s = 0.0;
        for (a, &st) in self.strides.iter().enumerate() {
            s += self.scaled[a][i] * (x[i + st] - xi) + self.scaled[a][i - st] * (x[i - st] - xi);
        }
        s
    }

    /// `out = x + L x / rate` on interior vertices, and `acc_k += coef_k * x`
    /// on every vertex. Boundary entries of `out` are left untouched.
    pub(crate) fn lazy_step(&self, x: &[f64], out: &mut [f64], accs: &mut [(&mut [f64], f64)]) {
        let d = self.strides.len();
        match d {
            1 => self.lazy_step_dim::<1>(x, out, accs),
            2 => self.lazy_step_dim::<2>(x, out, accs),
            3 => self.lazy_step_dim::<3>(x, out, accs),
            _ => self.lazy_step_dim::<4>(x, out, accs),
        }
    }

    fn lazy_step_dim<const D: usize>(&self, x: &[f64], out: &mut [f64], accs: &mut [(&mut [f64], f64)]) {
        let side = self.side;
        let block = ROWS_PER_TASK * side;
        let coefs: Vec<f64> = accs.iter().map(|(_, c)| *c).collect();
        let mut tasks: Vec<(usize, &mut [f64], Vec<&mut [f64]>)> = Vec::new();
        {
            let mut acc_chunks: Vec<std::slice::ChunksMut<'_, f64>> =
                accs.iter_mut().map(|(a, _)| a.chunks_mut(block)).collect();
            for (t, out_chunk) in out.chunks_mut(block).enumerate() {
                let accs_t = acc_chunks.iter_mut().map(|it| it.next().unwrap()).collect();
                tasks.push((t * ROWS_PER_TASK, out_chunk, accs_t));
            }
        }
        let run = |(row0, out_chunk, mut acc_chunk): (usize, &mut [f64], Vec<&mut [f64]>)| {
            let rows = out_chunk.len() / side;
            for r in 0..rows {
                let row = row0 + r;
                let base = row * side;
                for (acc, &c) in acc_chunk.iter_mut().zip(&coefs) {
                    if c != 0.0 {
                        let dst = &mut acc[r * side..(r + 1) * side];
                        for (dv, xv) in dst.iter_mut().zip(&x[base..base + side]) {
                            *dv += c * xv;
                        }
                    }
                }
                if !self.interior_row[row] {
                    continue;
                }
                let dst = &mut out_chunk[r * side..(r + 1) * side];
                if let Some(c) = self.uniform {
                    for j in 1..side - 1 {
                        let i = base + j;
                        let xi = x[i];
                        let mut s = 0.0;
                        for a in 0..D {
                            let st = self.strides[a];
                            s += x[i + st] + x[i - st];
                        }
                        dst[j] = xi + c * (s - (2 * D) as f64 * xi);
                    }
                } else {
                    for j in 1..side - 1 {
                        let i = base + j;
                        let xi = x[i];
                        let mut s = 0.0;
                        for a in 0..D {
                            let st = self.strides[a];
                            let w = &self.scaled[a];
                            s += w[i] * (x[i + st] - xi) + w[i - st] * (x[i - st] - xi);
                        }
                        dst[j] = xi + s;
                    }
                }
            }
        };
        if x.len() >= PARALLEL_MIN {
            tasks.into_par_iter().for_each(run);
        } else {
            tasks.into_iter().for_each(run);
        }
    }
}
