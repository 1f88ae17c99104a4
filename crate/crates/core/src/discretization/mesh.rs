//! Boundary-graded meshes and piecewise-linear grid functions.
//!
//! Nodes carry their boundary distance `δ` as well as their coordinate, so
//! cells of size `10⁻⁴⁸` next to the boundary are represented without
//! cancellation.

use serde::{Deserialize, Serialize};

use super::{DiscretizationError, Domain};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    domain: Domain,
    /// Node distances from the boundary along one half-profile, ascending
    /// from 0 to the inradius.
    half: Vec<f64>,
    /// Geometric ratio of the boundary layer.
    grading_ratio: f64,
}

/// Geometric cell sizes from `res` growing by `ratio` up to `h_int`, then
/// uniform cells of size about `h_int` up to `ell`.
fn half_profile(ell: f64, res: f64, ratio: f64, h_int: f64) -> Vec<f64> {
    let mut half = vec![0.0];
    let mut h = res;
    let mut d = 0.0;
    while h < h_int && d + h < ell {
        d += h;
        half.push(d);
        h *= ratio;
    }
    let rest = ell - d;
    let cells = (rest / h_int).round().max(1.0) as usize;
    for k in 1..cells {
        half.push(d + rest * k as f64 / cells as f64);
    }
    half.push(ell);
    half
}

/// Graded mesh with about `n` nodes, boundary cells of size
/// `boundary_resolution`, geometric grading into a uniform interior.
pub fn make_graded_mesh(
    domain: &Domain,
    n: usize,
    boundary_resolution: f64,
) -> Result<Mesh, DiscretizationError> {
    if n < 32 {
        return Err(DiscretizationError::InvalidParameter(format!(
            "mesh needs at least 32 nodes, got {n}"
        )));
    }
    let ell = domain.inradius();
    if !(boundary_resolution > 0.0 && boundary_resolution < ell / 10.0) {
        return Err(DiscretizationError::InvalidParameter(format!(
            "boundary resolution must lie in (0, {}), got {boundary_resolution}",
            ell / 10.0
        )));
    }
    let m = match domain {
        Domain::Interval { .. } => n / 2,
        Domain::Ball { .. } => n,
    };
    let h_int = ell / (m as f64 / 2.0);
    let layers = (m / 2).max(1) as f64;
    let ratio = (h_int / boundary_resolution)
        .powf(1.0 / layers)
        .max(1.0 + 1e-9);
    Ok(Mesh::from_half(
        *domain,
        half_profile(ell, boundary_resolution, ratio, h_int),
        ratio,
    ))
}

/// Graded mesh from an explicit grading ratio and interior spacing; the node
/// count follows from them.
pub fn make_graded_mesh_with_ratio(
    domain: &Domain,
    boundary_resolution: f64,
    ratio: f64,
    interior_spacing: f64,
) -> Result<Mesh, DiscretizationError> {
    let ell = domain.inradius();
    if !(boundary_resolution > 0.0 && boundary_resolution < ell / 10.0) {
        return Err(DiscretizationError::InvalidParameter(format!(
            "boundary resolution must lie in (0, {}), got {boundary_resolution}",
            ell / 10.0
        )));
    }
    if !(ratio > 1.0) || !(interior_spacing > 0.0 && interior_spacing <= ell / 2.0) {
        return Err(DiscretizationError::InvalidParameter(format!(
            "need ratio > 1 and 0 < interior spacing <= {}, got {ratio}, {interior_spacing}",
            ell / 2.0
        )));
    }
    Ok(Mesh::from_half(
        *domain,
        half_profile(ell, boundary_resolution, ratio, interior_spacing),
        ratio,
    ))
}

impl Mesh {
    fn from_half(domain: Domain, half: Vec<f64>, grading_ratio: f64) -> Self {
        Self {
            domain,
            half,
            grading_ratio,
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn grading_ratio(&self) -> f64 {
        self.grading_ratio
    }

    /// Size of the cell touching the boundary.
    pub fn boundary_resolution(&self) -> f64 {
        self.half[1]
    }

    pub fn n_nodes(&self) -> usize {
        match self.domain {
            Domain::Interval { .. } => 2 * self.half.len() - 1,
            Domain::Ball { .. } => self.half.len(),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_nodes() - 1
    }

    /// Boundary distance of node `i` (nodes ordered by coordinate).
    pub fn delta(&self, i: usize) -> f64 {
        let m = self.half.len();
        match self.domain {
            Domain::Interval { .. } => {
                if i < m {
                    self.half[i]
                } else {
                    self.half[2 * (m - 1) - i]
                }
            }
            Domain::Ball { .. } => self.half[m - 1 - i],
        }
    }

    pub fn deltas(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.delta(i)).collect()
    }

    /// Coordinate of node `i`: `x ∈ [0, L]` or `r ∈ [0, R]`.
    pub fn x(&self, i: usize) -> f64 {
        let m = self.half.len();
        match self.domain {
            Domain::Interval { length } => {
                if i < m {
                    self.half[i]
                } else {
                    length - self.half[2 * (m - 1) - i]
                }
            }
            Domain::Ball { radius, .. } => radius - self.half[m - 1 - i],
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.x(i)).collect()
    }

    /// Length of cell `k` (between nodes `k` and `k+1`), from the distances.
    pub fn cell_size(&self, k: usize) -> f64 {
        (self.delta(k + 1) - self.delta(k)).abs()
    }

    /// Whether node `i` lies on the boundary (`δ = 0`).
    pub fn is_boundary(&self, i: usize) -> bool {
        self.delta(i) == 0.0
    }

    pub fn min_cell(&self) -> f64 {
        (0..self.n_cells())
            .map(|k| self.cell_size(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// Bisects every cell and, when `new_res` is below the current boundary
    /// cell, appends geometric layers down to `new_res`. Old nodes are kept.
    pub fn refine(&self, new_res: Option<f64>) -> Mesh {
        let mut half = Vec::with_capacity(2 * self.half.len());
        for w in self.half.windows(2) {
            half.push(w[0]);
            half.push(0.5 * (w[0] + w[1]));
        }
        half.push(*self.half.last().unwrap());
        if let Some(res) = new_res {
            let mut layer = Vec::new();
            let mut d = half[1];
            while d > res * (1.0 + 1e-12) {
                d = (d / self.grading_ratio).max(res);
                layer.push(d);
            }
            layer.reverse();
            half.splice(1..1, layer);
        }
        Mesh::from_half(self.domain, half, self.grading_ratio)
    }

    /// Builds a mesh with the given half-profile distances (ascending from 0
    /// to the inradius).
    pub fn from_half_profile(
        domain: Domain,
        half: Vec<f64>,
        grading_ratio: f64,
    ) -> Result<Mesh, DiscretizationError> {
        let ok = half.len() >= 2
            && half[0] == 0.0
            && (half[half.len() - 1] - domain.inradius()).abs() <= 1e-14 * domain.inradius()
            && half.windows(2).all(|w| w[1] > w[0]);
        if !ok {
            return Err(DiscretizationError::InvalidParameter(
                "half profile must rise strictly from 0 to the inradius".into(),
            ));
        }
        Ok(Mesh::from_half(domain, half, grading_ratio))
    }

    /// Whether every node of `coarse` is a node of `self`.
    pub fn contains_nodes_of(&self, coarse: &Mesh) -> bool {
        let fine = &self.half;
        coarse
            .half
            .iter()
            .all(|d| fine.binary_search_by(|v| v.partial_cmp(d).unwrap()).is_ok())
    }

    /// Node distances of one half-profile, ascending from 0.
    pub fn half_profile(&self) -> &[f64] {
        &self.half
    }
}

/// A continuous piecewise-linear function on a mesh, zero at boundary nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub values: Vec<f64>,
}

impl GridFunction {
    /// Nodal interpolant of `g(δ, x)`, zeroed at the boundary.
    pub fn interpolate(mesh: &Mesh, mut g: impl FnMut(f64, f64) -> f64) -> Self {
        let values = (0..mesh.n_nodes())
            .map(|i| {
                if mesh.is_boundary(i) {
                    0.0
                } else {
                    g(mesh.delta(i), mesh.x(i))
                }
            })
            .collect();
        Self { values }
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            values: vec![0.0; mesh.n_nodes()],
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values on the nodes of a mesh that contains every node of `mesh`.
    pub fn prolongate(&self, mesh: &Mesh, fine: &Mesh) -> Result<Self, DiscretizationError> {
        if self.values.len() != mesh.n_nodes() {
            return Err(DiscretizationError::MeshMismatch {
                expected: mesh.n_nodes(),
                got: self.values.len(),
            });
        }
        let xs = mesh.xs();
        let values = (0..fine.n_nodes())
            .map(|i| {
                if fine.is_boundary(i) {
                    return 0.0;
                }
                let x = fine.x(i);
                let k = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1) - 1;
                let (d0, d1) = (mesh.delta(k), mesh.delta(k + 1));
                let d = fine.delta(i);
                let s = if d1 == d0 { 0.0 } else { (d - d0) / (d1 - d0) };
                (1.0 - s) * self.values[k] + s * self.values[k + 1]
            })
            .collect();
        Ok(Self { values })
    }

    /// CSV `x, delta, u` at 17 significant digits.
    pub fn to_csv(&self, mesh: &Mesh) -> String {
        let mut out = String::from("x,delta,u\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}\n",
                mesh.x(i),
                mesh.delta(i),
                v
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_grading_at_both_ends() {
        let d = Domain::interval(1.0).unwrap();
        let m = make_graded_mesh(&d, 200, 1e-6).unwrap();
        let n = m.n_nodes();
        assert!(n >= 100 && n <= 400, "{n}");
        assert!(m.cell_size(0) <= 1e-6 * (1.0 + 1e-12));
        assert!(m.cell_size(n - 2) <= 1e-6 * (1.0 + 1e-12));
        assert_eq!(m.x(0), 0.0);
        assert_eq!(m.x(n - 1), 1.0);
        assert!(m.xs().windows(2).all(|w| w[1] > w[0]));
        assert!(m.xs().contains(&0.5));
    }

    #[test]
    fn ball_grading_only_at_the_sphere() {
        let d = Domain::ball(3, 1.0).unwrap();
        let m = make_graded_mesh(&d, 200, 1e-6).unwrap();
        let n = m.n_nodes();
        assert!(m.cell_size(n - 2) <= 1e-6 * (1.0 + 1e-12));
        assert!(m.cell_size(0) > 1e-3);
        assert!(m.is_boundary(n - 1) && !m.is_boundary(0));
    }

    #[test]
    fn refinement_is_nested() {
        let d = Domain::interval(1.0).unwrap();
        let m = make_graded_mesh(&d, 100, 1e-4).unwrap();
        let f = m.refine(None);
        assert!(f.contains_nodes_of(&m));
        assert_eq!(f.n_cells(), 2 * m.n_cells());
        let g = f.refine(Some(1e-9));
        assert!(g.contains_nodes_of(&f));
        assert!((g.boundary_resolution() - 1e-9).abs() < 1e-20);
    }

    #[test]
    fn prolongation_is_exact_for_nested_meshes() {
        let d = Domain::interval(1.0).unwrap();
        let m = make_graded_mesh(&d, 64, 1e-3).unwrap();
        let f = m.refine(Some(1e-5));
        let u = GridFunction::interpolate(&m, |_, x| x * (1.0 - x));
        let uf = u.prolongate(&m, &f).unwrap();
        let idx = f.xs();
        for (i, x) in idx.iter().enumerate() {
            if let Some(k) = m.xs().iter().position(|v| v == x) {
                assert_eq!(uf.values[i], u.values[k]);
            }
        }
    }

    #[test]
    fn bad_parameters() {
        let d = Domain::interval(1.0).unwrap();
        assert!(make_graded_mesh(&d, 10, 1e-6).is_err());
        assert!(make_graded_mesh(&d, 100, 0.2).is_err());
    }
}
