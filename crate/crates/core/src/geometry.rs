//! Computational geometry: the masked structured grid for the unit cube, the
//! nested boundary patches around the probe anchor, the boundary cutoff and the
//! extended domain obtained by gluing a half-ball cap onto one face.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Spatial dimension of every grid built by this crate.
pub const GRID_DIM: usize = 3;

pub fn distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// 64-bit FNV-1a, used for grid and calibration fingerprints.
#[derive(Clone, Copy, Debug)]
pub struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv1a {
    pub fn write_u64(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    pub fn write_f64(&mut self, v: f64) {
        self.write_u64(v.to_bits());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
    /// Interior node of the extended domain that is not an interior node of the cube.
    ExtensionInterior,
}

impl NodeKind {
    pub fn is_active(self) -> bool {
        self != NodeKind::Exterior
    }

    pub fn is_unknown(self) -> bool {
        matches!(self, NodeKind::Interior | NodeKind::ExtensionInterior)
    }
}

/// Uniform lattice of `dims[0] x dims[1] x dims[2]` nodes, x-fastest ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    pub dims: [usize; 3],
    pub origin: Point,
    pub h: f64,
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    #[inline]
    pub fn point(&self, idx: usize) -> Point {
        let c = self.coords(idx);
        [
            self.origin[0] + c[0] as f64 * self.h,
            self.origin[1] + c[1] as f64 * self.h,
            self.origin[2] + c[2] as f64 * self.h,
        ]
    }

    /// Neighbor along `axis` in direction `+1` (`forward`) or `-1`.
    #[inline]
    pub fn step(&self, idx: usize, axis: usize, forward: bool) -> Option<usize> {
        let mut c = self.coords(idx);
        if forward {
            if c[axis] + 1 >= self.dims[axis] {
                return None;
            }
            c[axis] += 1;
        } else {
            if c[axis] == 0 {
                return None;
            }
            c[axis] -= 1;
        }
        Some(self.index(c))
    }

    /// Node at integer offset `off` from `idx`, if it lies in the lattice.
    pub fn offset(&self, idx: usize, off: [isize; 3]) -> Option<usize> {
        let c = self.coords(idx);
        let mut out = [0usize; 3];
        for a in 0..3 {
            let v = c[a] as isize + off[a];
            if v < 0 || v >= self.dims[a] as isize {
                return None;
            }
            out[a] = v as usize;
        }
        Some(self.index(out))
    }
}

/// A lattice with per-node classification, trapezoidal quadrature data and the
/// boundary/unknown index sets the solvers work with.
#[derive(Clone, Debug)]
pub struct MaskedGrid {
    lattice: Lattice,
    kind: Vec<NodeKind>,
    /// Per-axis trapezoid factor of each node (1/2 on a bounding plane of the cube).
    axis_weight: Vec<[f64; 3]>,
    mass: Vec<f64>,
    boundary: Vec<usize>,
    boundary_pos: Vec<usize>,
    unknowns: Vec<usize>,
    id: u64,
}

impl MaskedGrid {
    fn new(lattice: Lattice, kind: Vec<NodeKind>, axis_weight: Vec<[f64; 3]>) -> Self {
        let h3 = lattice.h.powi(3);
        let mass = kind
            .iter()
            .zip(&axis_weight)
            .map(|(k, w)| if k.is_active() { h3 * w[0] * w[1] * w[2] } else { 0.0 })
            .collect();
        let mut boundary = Vec::new();
        let mut unknowns = Vec::new();
        let mut boundary_pos = vec![usize::MAX; kind.len()];
        for (i, k) in kind.iter().enumerate() {
            match k {
                NodeKind::Boundary => {
                    boundary_pos[i] = boundary.len();
                    boundary.push(i);
                }
                NodeKind::Interior | NodeKind::ExtensionInterior => unknowns.push(i),
                NodeKind::Exterior => {}
            }
        }
        let mut hasher = Fnv1a::default();
        for d in lattice.dims {
            hasher.write_u64(d as u64);
        }
        for o in lattice.origin {
            hasher.write_f64(o);
        }
        hasher.write_f64(lattice.h);
        for k in &kind {
            hasher.write_u64(*k as u64);
        }
        MaskedGrid {
            lattice,
            kind,
            axis_weight,
            mass,
            boundary,
            boundary_pos,
            unknowns,
            id: hasher.finish(),
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn h(&self) -> f64 {
        self.lattice.h
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kind[idx]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kind
    }

    pub fn axis_weight(&self, idx: usize) -> [f64; 3] {
        self.axis_weight[idx]
    }

    /// Nodal quadrature weights; they sum to the measure of the domain.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// Position of `idx` in the boundary list, if it is a boundary node.
    pub fn boundary_position(&self, idx: usize) -> Option<usize> {
        match self.boundary_pos[idx] {
            usize::MAX => None,
            p => Some(p),
        }
    }

    pub fn unknowns(&self) -> &[usize] {
        &self.unknowns
    }

    pub fn point(&self, idx: usize) -> Point {
        self.lattice.point(idx)
    }

    pub fn id(&self) -> u64 {
        self.id
    }
}

/// Axis-aligned cube `[0, side]^3` embedded in a bounding box padded by `padding`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryDescriptor {
    pub side: f64,
    pub padding: f64,
}

impl Default for GeometryDescriptor {
    fn default() -> Self {
        GeometryDescriptor { side: 1.0, padding: 0.5 }
    }
}

/// One face of the cube, identified by its normal axis and side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Face {
    pub axis: usize,
    pub upper: bool,
}

impl Face {
    pub fn outward_normal(&self) -> Point {
        let mut n = [0.0; 3];
        n[self.axis] = if self.upper { 1.0 } else { -1.0 };
        n
    }

    pub fn label(&self) -> String {
        format!("{}{}", ["x", "y", "z"][self.axis], if self.upper { '+' } else { '-' })
    }
}

impl std::str::FromStr for Face {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bytes = s.as_bytes();
        if bytes.len() != 2 {
            return Err(Error::Config(format!("face must look like 'z+', got '{s}'")));
        }
        let axis = match bytes[0] {
            b'x' => 0,
            b'y' => 1,
            b'z' => 2,
            _ => return Err(Error::Config(format!("unknown face axis in '{s}'"))),
        };
        let upper = match bytes[1] {
            b'+' => true,
            b'-' => false,
            _ => return Err(Error::Config(format!("face side must be '+' or '-' in '{s}'"))),
        };
        Ok(Face { axis, upper })
    }
}

/// The discrete domain: a classified grid over the closed cube.
#[derive(Clone, Debug)]
pub struct DomainGrid {
    pub dim: usize,
    pub nodes_per_axis: usize,
    pub geometry: GeometryDescriptor,
    grid: MaskedGrid,
}

impl DomainGrid {
    pub fn grid(&self) -> &MaskedGrid {
        &self.grid
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    pub fn side(&self) -> f64 {
        self.geometry.side
    }

    pub fn volume(&self) -> f64 {
        self.geometry.side.powi(GRID_DIM as i32)
    }

    /// Whether `p` lies on the plane of `face`, up to rounding.
    pub fn on_face(&self, p: &Point, face: Face) -> bool {
        let target = if face.upper { self.geometry.side } else { 0.0 };
        (p[face.axis] - target).abs() <= 1e-9 * self.geometry.side
    }

    pub fn face_center(&self, face: Face) -> Point {
        let half = 0.5 * self.geometry.side;
        let mut c = [half; 3];
        c[face.axis] = if face.upper { self.geometry.side } else { 0.0 };
        c
    }

    /// Euclidean distance from `p` to the closed cube.
    pub fn distance_to_closure(&self, p: &Point) -> f64 {
        let s = self.geometry.side;
        let clamped = [p[0].clamp(0.0, s), p[1].clamp(0.0, s), p[2].clamp(0.0, s)];
        distance(p, &clamped)
    }

    pub fn boundary_field(&self, values: Vec<f64>) -> Result<BoundaryField> {
        BoundaryField::new(&self.grid, values, Support::General)
    }
}

/// Build the classified grid for the cube. `nodes` counts grid points per axis.
pub fn build_domain(dim: usize, nodes: usize, geometry: &GeometryDescriptor) -> Result<DomainGrid> {
    if dim < 3 {
        return Err(Error::Config(format!("n ≥ 3 required (got n = {dim})")));
    }
    if dim != GRID_DIM {
        return Err(Error::Config(format!(
            "grids are built for n = 3 only (got n = {dim}); higher-dimensional parameters are metadata"
        )));
    }
    if nodes < 8 {
        return Err(Error::Config(format!(
            "N = {nodes} nodes per axis is too small to separate the boundary patches (need N ≥ 8)"
        )));
    }
    if !(geometry.side > 0.0) || !(geometry.padding >= 0.0) {
        return Err(Error::Config("cube side must be positive and padding non-negative".into()));
    }
    let h = geometry.side / (nodes - 1) as f64;
    let lattice = Lattice { dims: [nodes; 3], origin: [0.0; 3], h };
    let mut kind = Vec::with_capacity(lattice.len());
    let mut axis_weight = Vec::with_capacity(lattice.len());
    for idx in 0..lattice.len() {
        let c = lattice.coords(idx);
        let on_plane = c.map(|v| v == 0 || v == nodes - 1);
        kind.push(if on_plane.iter().any(|&b| b) { NodeKind::Boundary } else { NodeKind::Interior });
        axis_weight.push(on_plane.map(|b| if b { 0.5 } else { 1.0 }));
    }
    Ok(DomainGrid {
        dim,
        nodes_per_axis: nodes,
        geometry: geometry.clone(),
        grid: MaskedGrid::new(lattice, kind, axis_weight),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    /// Vanishes outside the inner patch.
    Gamma0,
    General,
}

/// Real values on the boundary nodes of a grid, in boundary-list order.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryField {
    pub values: Vec<f64>,
    pub support: Support,
    grid_id: u64,
}

impl BoundaryField {
    pub fn new(grid: &MaskedGrid, values: Vec<f64>, support: Support) -> Result<Self> {
        if values.len() != grid.boundary().len() {
            return Err(Error::GridMismatch(format!(
                "boundary field has {} values but the grid has {} boundary nodes",
                values.len(),
                grid.boundary().len()
            )));
        }
        Ok(BoundaryField { values, support, grid_id: grid.id() })
    }

    pub fn zeros(grid: &MaskedGrid) -> Self {
        BoundaryField { values: vec![0.0; grid.boundary().len()], support: Support::General, grid_id: grid.id() }
    }

    /// Samples `f` at every boundary node.
    pub fn from_fn(grid: &MaskedGrid, f: impl Fn(&Point) -> f64) -> Self {
        let values = grid.boundary().iter().map(|&i| f(&grid.point(i))).collect();
        BoundaryField { values, support: Support::General, grid_id: grid.id() }
    }

    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn check_grid(&self, grid: &MaskedGrid) -> Result<()> {
        if self.grid_id != grid.id() {
            return Err(Error::GridMismatch("boundary field belongs to a different grid".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        BoundaryField { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    /// `self + s * other`; the support tag is kept only if both agree.
    pub fn axpy(&self, s: f64, other: &BoundaryField) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        let support = if self.support == other.support { self.support } else { Support::General };
        BoundaryField { values, support, grid_id: self.grid_id }
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.values.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Quintic step with `S(0) = 0`, `S(1) = 1` and vanishing first and second
/// derivatives at both ends.
pub fn smoothstep5(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

/// Radial C² bump: 1 for `s <= inner`, 0 for `s >= outer`.
pub fn radial_bump(s: f64, inner: f64, outer: f64) -> f64 {
    if s <= inner {
        1.0
    } else if s >= outer {
        0.0
    } else {
        1.0 - smoothstep5((s - inner) / (outer - inner))
    }
}

/// Probe anchor, nested boundary patches and the cutoff on the outer patch.
#[derive(Clone, Debug)]
pub struct BoundaryPatches {
    pub face: Face,
    pub x0: Point,
    pub x_star: Point,
    pub r0: f64,
    pub r1: f64,
    /// Boundary positions (indices into the boundary list) of the inner patch.
    pub gamma0: Vec<usize>,
    pub gamma1: Vec<usize>,
    pub chi: BoundaryField,
    in_gamma0: Vec<bool>,
    in_gamma1: Vec<bool>,
}

impl BoundaryPatches {
    pub fn in_gamma0(&self, boundary_pos: usize) -> bool {
        self.in_gamma0[boundary_pos]
    }

    pub fn in_gamma1(&self, boundary_pos: usize) -> bool {
        self.in_gamma1[boundary_pos]
    }

    /// Boundary position of the sweep anchor `x_*`.
    pub fn x_star_position(&self, domain: &DomainGrid) -> usize {
        nearest_boundary_position(domain, &self.x_star)
    }

    /// Wraps values on the inner patch into a boundary field supported there.
    pub fn gamma0_field(&self, domain: &DomainGrid, patch_values: &[f64]) -> Result<BoundaryField> {
        if patch_values.len() != self.gamma0.len() {
            return Err(Error::InvalidInput(format!(
                "{} values supplied for {} inner-patch nodes",
                patch_values.len(),
                self.gamma0.len()
            )));
        }
        let mut values = vec![0.0; domain.grid().boundary().len()];
        for (&p, &v) in self.gamma0.iter().zip(patch_values) {
            values[p] = v;
        }
        BoundaryField::new(domain.grid(), values, Support::Gamma0)
    }

    /// Whether `f` vanishes outside the inner patch.
    pub fn supported_in_gamma0(&self, f: &BoundaryField) -> bool {
        f.values.iter().enumerate().all(|(p, v)| self.in_gamma0[p] || *v == 0.0)
    }

    /// Radial C² bump on the face centred at `x_*`, equal to 1 on `|x - x_*| <= plateau`.
    pub fn anchor_bump(&self, domain: &DomainGrid, plateau: f64, radius: f64) -> Result<BoundaryField> {
        if !(plateau < radius) || radius > self.r0 + 1e-12 {
            return Err(Error::Config(format!(
                "anchor bump needs plateau < radius ≤ r0 (got {plateau}, {radius}, r0 = {})",
                self.r0
            )));
        }
        let grid = domain.grid();
        let values: Vec<f64> = grid
            .boundary()
            .iter()
            .enumerate()
            .map(|(p, &i)| {
                if !self.in_gamma0[p] {
                    return 0.0;
                }
                radial_bump(distance(&grid.point(i), &self.x_star), plateau, radius)
            })
            .collect();
        BoundaryField::new(grid, values, Support::Gamma0)
    }
}

fn nearest_boundary_position(domain: &DomainGrid, x: &Point) -> usize {
    let grid = domain.grid();
    let mut best = (f64::INFINITY, 0);
    for (p, &i) in grid.boundary().iter().enumerate() {
        let d = distance(&grid.point(i), x);
        if d < best.0 {
            best = (d, p);
        }
    }
    best.1
}

/// Builds Γ₀ = Γ ∩ B̄(x₀, r₀) and Γ₁ = Γ ∩ B(x₀, r₁) on `face`, with `x₀`
/// snapped to the boundary node nearest the face centre, and the cutoff χ.
pub fn build_patches(domain: &DomainGrid, face: Face, r0: f64, r1: f64) -> Result<BoundaryPatches> {
    let h = domain.h();
    let half_width = 0.5 * domain.side();
    if !(r0 > h) {
        return Err(Error::Config(format!("r0 = {r0} must exceed the grid spacing h = {h}")));
    }
    if !(r1 > r0) {
        return Err(Error::Config(format!("need r0 < r1 (got r0 = {r0}, r1 = {r1})")));
    }
    if !(r1 < half_width) {
        return Err(Error::Config(format!(
            "r1 = {r1} reaches a cube edge (face half-width {half_width}); corners must stay outside Γ₁"
        )));
    }
    if r1 - r0 < h {
        return Err(Error::Config(format!(
            "r1 - r0 = {} is below one grid cell; Γ₀ ⋐ Γ₁ cannot be resolved",
            r1 - r0
        )));
    }
    let grid = domain.grid();
    let centre = domain.face_center(face);
    let x0 = grid.point(grid.boundary()[nearest_boundary_position(domain, &centre)]);
    let tol = 1e-12 * domain.side();
    let nb = grid.boundary().len();
    let mut in_gamma0 = vec![false; nb];
    let mut in_gamma1 = vec![false; nb];
    let mut chi = vec![0.0; nb];
    for (p, &i) in grid.boundary().iter().enumerate() {
        let x = grid.point(i);
        if !domain.on_face(&x, face) {
            continue;
        }
        let s = distance(&x, &x0);
        in_gamma0[p] = s <= r0 + tol;
        in_gamma1[p] = s < r1 - tol;
        chi[p] = radial_bump(s, r0, r1);
    }
    let gamma0 = (0..nb).filter(|&p| in_gamma0[p]).collect();
    let gamma1 = (0..nb).filter(|&p| in_gamma1[p]).collect();
    Ok(BoundaryPatches {
        face,
        x0,
        x_star: x0,
        r0,
        r1,
        gamma0,
        gamma1,
        chi: BoundaryField::new(grid, chi, Support::General)?,
        in_gamma0,
        in_gamma1,
    })
}

/// Ω₀ = Ω ∪ B(x₀, r₀) on its own lattice, extended past the probed face.
#[derive(Clone, Debug)]
pub struct ExtendedDomain {
    grid: MaskedGrid,
    cube_to_ext: Vec<usize>,
    pub x0: Point,
    pub r0: f64,
    pub xi: Point,
    pub delta0: f64,
    pub cap: Vec<usize>,
    side: f64,
    face: Face,
}

impl ExtendedDomain {
    pub fn grid(&self) -> &MaskedGrid {
        &self.grid
    }

    pub fn face(&self) -> Face {
        self.face
    }

    /// Extended-lattice index of a cube node.
    pub fn ext_index(&self, cube_idx: usize) -> usize {
        self.cube_to_ext[cube_idx]
    }

    pub fn singularity_point(&self, delta: f64) -> Point {
        [
            self.x0[0] + delta * self.xi[0],
            self.x0[1] + delta * self.xi[1],
            self.x0[2] + delta * self.xi[2],
        ]
    }

    pub fn distance_to_cube(&self, p: &Point) -> f64 {
        let s = self.side;
        let clamped = [p[0].clamp(0.0, s), p[1].clamp(0.0, s), p[2].clamp(0.0, s)];
        distance(p, &clamped)
    }

    /// Distance from a point of the cap to the continuum boundary of Ω₀
    /// (spherical part of the cap and the face outside the disc).
    pub fn distance_to_boundary(&self, p: &Point) -> f64 {
        let to_sphere = (self.r0 - distance(p, &self.x0)).abs();
        let a = self.face.axis;
        let height = (p[a] - self.x0[a]).abs();
        let mut lateral = 0.0;
        for b in 0..3 {
            if b != a {
                lateral += (p[b] - self.x0[b]).powi(2);
            }
        }
        let lateral = lateral.sqrt();
        let to_face = if lateral >= self.r0 {
            height
        } else {
            (height * height + (self.r0 - lateral).powi(2)).sqrt()
        };
        to_sphere.min(to_face)
    }
}

/// Glues the open half-ball `B(x₀, r₀) ∖ Ω̄` onto the probed face.
pub fn extend_domain(domain: &DomainGrid, patches: &BoundaryPatches) -> Result<ExtendedDomain> {
    let h = domain.h();
    let r0 = patches.r0;
    if r0 >= domain.geometry.padding {
        return Err(Error::Config(format!(
            "the cap B(x0, {r0}) leaves the bounding box (padding {})",
            domain.geometry.padding
        )));
    }
    let face = patches.face;
    let axis = face.axis;
    let nodes = domain.nodes_per_axis;
    let pad = (r0 / h).ceil() as usize + 1;
    let mut dims = [nodes; 3];
    dims[axis] += pad;
    let mut origin = [0.0; 3];
    if !face.upper {
        origin[axis] = -(pad as f64) * h;
    }
    let lattice = Lattice { dims, origin, h };
    let cube = domain.grid().lattice();
    let shift = if face.upper { 0 } else { pad };
    let cube_to_ext: Vec<usize> = (0..cube.len())
        .map(|i| {
            let mut c = cube.coords(i);
            c[axis] += shift;
            lattice.index(c)
        })
        .collect();

    let side = domain.side();
    let tol = 1e-12 * side;
    let mut in_cube = vec![false; lattice.len()];
    for &e in &cube_to_ext {
        in_cube[e] = true;
    }
    let active: Vec<bool> = (0..lattice.len())
        .map(|i| in_cube[i] || distance(&lattice.point(i), &patches.x0) < r0 - tol)
        .collect();
    let mut kind = vec![NodeKind::Exterior; lattice.len()];
    let mut cap = Vec::new();
    for i in 0..lattice.len() {
        if !active[i] {
            continue;
        }
        let closed = (0..3).all(|a| {
            [true, false]
                .iter()
                .all(|&fw| lattice.step(i, a, fw).map(|j| active[j]).unwrap_or(false))
        });
        kind[i] = if !closed {
            NodeKind::Boundary
        } else if in_cube[i] && domain.grid().kind(cube.index({
            let mut c = lattice.coords(i);
            c[axis] -= shift;
            c
        })) == NodeKind::Interior
        {
            NodeKind::Interior
        } else {
            NodeKind::ExtensionInterior
        };
        if !in_cube[i] {
            cap.push(i);
        }
    }
    let axis_weight = vec![[1.0; 3]; lattice.len()];
    Ok(ExtendedDomain {
        grid: MaskedGrid::new(lattice, kind, axis_weight),
        cube_to_ext,
        x0: patches.x0,
        r0,
        xi: face.outward_normal(),
        delta0: 0.5 * r0,
        cap,
        side,
        face,
    })
}
