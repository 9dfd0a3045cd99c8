//! Uniform grids on intervals and boxes, with the difference stencils and
//! quadratures used by every other module.
//!
//! Nodes are stored in row-major order: in 2D the node `(i, j)` (axis 0 index
//! `i`, axis 1 index `j`) lives at `i * n[1] + j`.

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    extents: [f64; 2],
    n: [usize; 2],
    h: [f64; 2],
    boundary: Vec<bool>,
    weights: Vec<f64>,
    /// Bit 0: half weight along axis 0; bit 1: half weight along axis 1.
    node_class: Vec<u8>,
    /// `(a, b, w)`: energy contribution `w * (f[b] - f[a])^2`.
    edges: Vec<(usize, usize, f64)>,
    /// Per edge: `2 * axis + (transverse half weight)`.
    edge_class: Vec<u8>,
}

impl Grid {
    pub fn new(dimension: usize, extents: &[f64], n: &[usize]) -> Result<Self> {
        if dimension != 1 && dimension != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dimension}")));
        }
        if extents.len() != dimension || n.len() != dimension {
            return Err(Error::InvalidGrid(format!(
                "expected {dimension} extents and node counts, got {} and {}",
                extents.len(),
                n.len()
            )));
        }
        for (axis, (&len, &count)) in extents.iter().zip(n).enumerate() {
            if !(len > 0.0 && len.is_finite()) {
                return Err(Error::InvalidGrid(format!("extent on axis {axis} must be positive, got {len}")));
            }
            if count < 3 {
                return Err(Error::InvalidGrid(format!("need at least 3 nodes on axis {axis}, got {count}")));
            }
        }
        let ext = [extents[0], if dimension == 2 { extents[1] } else { 1.0 }];
        let nn = [n[0], if dimension == 2 { n[1] } else { 1 }];
        let h = [ext[0] / (nn[0] - 1) as f64, if dimension == 2 { ext[1] / (nn[1] - 1) as f64 } else { 1.0 }];

        let total = nn[0] * nn[1];
        let mut boundary = vec![false; total];
        let mut weights = vec![0.0; total];
        let mut node_class = vec![0u8; total];
        let trap = |k: usize, count: usize, step: f64| if k == 0 || k + 1 == count { 0.5 * step } else { step };
        for i in 0..nn[0] {
            for j in 0..nn[1] {
                let idx = i * nn[1] + j;
                let on_edge0 = i == 0 || i + 1 == nn[0];
                let on_edge1 = dimension == 2 && (j == 0 || j + 1 == nn[1]);
                node_class[idx] = on_edge0 as u8 | (on_edge1 as u8) << 1;
                if dimension == 1 {
                    boundary[idx] = on_edge0;
                    weights[idx] = trap(i, nn[0], h[0]);
                } else {
                    boundary[idx] = on_edge0 || j == 0 || j + 1 == nn[1];
                    weights[idx] = trap(i, nn[0], h[0]) * trap(j, nn[1], h[1]);
                }
            }
        }

        let mut edges = Vec::new();
        let mut edge_class = Vec::new();
        if dimension == 1 {
            for i in 0..nn[0] - 1 {
                edges.push((i, i + 1, 1.0 / h[0]));
                edge_class.push(0);
            }
        } else {
            for i in 0..nn[0] {
                for j in 0..nn[1] {
                    let idx = i * nn[1] + j;
                    if i + 1 < nn[0] {
                        edges.push((idx, idx + nn[1], trap(j, nn[1], h[1]) / h[0]));
                        edge_class.push((j == 0 || j + 1 == nn[1]) as u8);
                    }
                    if j + 1 < nn[1] {
                        edges.push((idx, idx + 1, trap(i, nn[0], h[0]) / h[1]));
                        edge_class.push(2 + (i == 0 || i + 1 == nn[0]) as u8);
                    }
                }
            }
        }

        Ok(Grid { dim: dimension, extents: ext, n: nn, h, boundary, weights, node_class, edges, edge_class })
    }

    pub fn unit_interval(n: usize) -> Result<Self> {
        Grid::new(1, &[1.0], &[n])
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.dim]
    }

    pub fn counts(&self) -> &[usize] {
        &self.n[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.boundary[idx]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// |Ω|.
    pub fn measure(&self) -> f64 {
        self.extents().iter().product()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n[1] + j
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        [idx / self.n[1], idx % self.n[1]]
    }

    pub fn coord(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.multi_index(idx);
        [i as f64 * self.h[0], if self.dim == 2 { j as f64 * self.h[1] } else { 0.0 }]
    }

    /// Distance to ∂Ω in the sup-over-faces sense used for box collars.
    pub fn boundary_distance(&self, idx: usize) -> f64 {
        let x = self.coord(idx);
        (0..self.dim)
            .map(|a| x[a].min(self.extents[a] - x[a]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&k| !self.boundary[k])
    }

    /// Offsets of the axis neighbours of an interior node, with `1/h²` for the axis.
    pub(crate) fn stencil(&self) -> Vec<(usize, f64)> {
        let mut s = vec![(self.n[1], 1.0 / (self.h[0] * self.h[0]))];
        if self.dim == 2 {
            s.push((1, 1.0 / (self.h[1] * self.h[1])));
        }
        s
    }

    /// Spacings evaluated in `T` from the extents, so that the stencil,
    /// energy and quadrature constants are mutually consistent to the
    /// roundoff of `T` rather than of `f64`.
    pub(crate) fn spacing_in<T: Real>(&self) -> [T; 2] {
        let h = |a: usize| T::of(self.extents[a]) / T::of_usize(self.n[a] - 1);
        [h(0), if self.dim == 2 { h(1) } else { T::one() }]
    }

    fn node_weight_table<T: Real>(&self) -> [T; 4] {
        let [h0, h1] = self.spacing_in::<T>();
        let half = T::of(0.5);
        [h0 * h1, half * h0 * h1, h0 * half * h1, half * h0 * half * h1]
    }

    fn edge_weight_table<T: Real>(&self) -> [T; 4] {
        let [h0, h1] = self.spacing_in::<T>();
        let half = T::of(0.5);
        if self.dim == 1 {
            let w = T::one() / h0;
            return [w, w, w, w];
        }
        [h1 / h0, half * h1 / h0, h0 / h1, half * h0 / h1]
    }

    pub fn check_len<T>(&self, values: &[T]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), got: values.len() });
        }
        Ok(())
    }

    /// Σ quad_weights·values.
    pub fn integrate<T: Real>(&self, f: &Field<T>) -> Result<T> {
        self.check_len(&f.values)?;
        let table = self.node_weight_table::<T>();
        let mut acc = T::zero();
        for (k, (&v, &c)) in f.values.iter().zip(&self.node_class).enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { node: k });
            }
            acc = acc + table[c as usize] * v;
        }
        Ok(acc)
    }

    /// Central second-difference Laplacian; boundary nodes read as
    /// `boundary_value`, output boundary nodes are zero.
    pub fn laplacian<T: Real>(&self, f: &Field<T>, boundary_value: T) -> Field<T> {
        let mut out = vec![T::zero(); self.len()];
        self.laplacian_into(&f.values, boundary_value, &mut out);
        Field::new(out)
    }

    pub(crate) fn laplacian_into<T: Real>(&self, f: &[T], bv: T, out: &mut [T]) {
        let h = self.spacing_in::<T>();
        let stencil: Vec<(usize, T)> =
            self.stencil().into_iter().enumerate().map(|(a, (o, _))| (o, T::one() / (h[a] * h[a]))).collect();
        let val = |k: usize| if self.boundary[k] { bv } else { f[k] };
        for k in 0..self.len() {
            if self.boundary[k] {
                out[k] = T::zero();
                continue;
            }
            let centre = f[k];
            let mut acc = T::zero();
            for &(off, c) in &stencil {
                acc = acc + c * (val(k - off) + val(k + off) - centre - centre);
            }
            out[k] = acc;
        }
    }

    /// ∫|∇f|² from forward differences on grid edges, boundary nodes read as
    /// `boundary_value`.
    pub fn dirichlet_energy<T: Real>(&self, f: &Field<T>, boundary_value: T) -> T {
        self.gradient_inner(f, boundary_value, f, boundary_value)
    }

    /// Discrete ∫∇f·∇g, the bilinear form whose diagonal is [`Grid::dirichlet_energy`].
    pub fn gradient_inner<T: Real>(&self, f: &Field<T>, bf: T, g: &Field<T>, bg: T) -> T {
        let fv = |k: usize| if self.boundary[k] { bf } else { f.values[k] };
        let gv = |k: usize| if self.boundary[k] { bg } else { g.values[k] };
        let table = self.edge_weight_table::<T>();
        let mut acc = T::zero();
        for (&(a, b, _), &c) in self.edges.iter().zip(&self.edge_class) {
            acc = acc + table[c as usize] * (fv(b) - fv(a)) * (gv(b) - gv(a));
        }
        acc
    }

    /// Σ over interior nodes of the per-node mass of the nodes in `mask`.
    pub fn integrate_where<T: Real>(&self, f: &Field<T>, mask: impl Fn(usize) -> bool) -> T {
        let table = self.node_weight_table::<T>();
        let mut acc = T::zero();
        for k in 0..self.len() {
            if mask(k) {
                acc = acc + table[self.node_class[k] as usize] * f.values[k];
            }
        }
        acc
    }
}

/// Nodal values on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T = f64> {
    pub values: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn new(values: Vec<T>) -> Self {
        Field { values }
    }

    pub fn constant(grid: &Grid, c: T) -> Self {
        Field { values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        Field { values: (0..grid.len()).map(|k| T::of(f(grid.coord(k)))).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Field { values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Field<T>, f: impl Fn(T, T) -> T) -> Self {
        Field { values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect() }
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> T {
        self.values.iter().cloned().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().cloned().fold(T::infinity(), T::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn to_f64(&self) -> Field<f64> {
        Field { values: crate::real::to_f64_vec(&self.values) }
    }

    pub fn cast<U: Real>(&self) -> Field<U> {
        Field { values: self.values.iter().map(|v| U::of(v.to_f64_lossy())).collect() }
    }
}

/// Discrete L² norm of `f - g` with trapezoid weights.
pub fn l2_distance(grid: &Grid, f: &Field, g: &Field) -> f64 {
    f.values
        .iter()
        .zip(&g.values)
        .zip(grid.quad_weights())
        .map(|((a, b), w)| w * (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
