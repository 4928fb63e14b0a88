use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{ElementKind, Field, Support};
use crate::geometry::{norm, tangential, Point};
use crate::mesh::{Mesh, Tag};

/// Boundary space a WSS field lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundarySpaceKind {
    Cg1,
    Dg1,
    Dg0,
}

impl BoundarySpaceKind {
    pub fn element(self) -> ElementKind {
        match self {
            BoundarySpaceKind::Cg1 => ElementKind::P1,
            BoundarySpaceKind::Dg1 => ElementKind::DG1,
            BoundarySpaceKind::Dg0 => ElementKind::DG0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundarySpaceKind::Cg1 => "cg1",
            BoundarySpaceKind::Dg1 => "dg1",
            BoundarySpaceKind::Dg0 => "dg0",
        }
    }
}

/// WSS evaluation method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WssMethod {
    /// Boundary-flux evaluation from the discrete momentum residual (CG1).
    Bflux,
    /// L2 projection of the tangential traction.
    Cg1,
    Dg1,
    Dg0,
}

impl WssMethod {
    pub const ALL: [WssMethod; 4] = [WssMethod::Bflux, WssMethod::Cg1, WssMethod::Dg1, WssMethod::Dg0];

    pub fn name(self) -> &'static str {
        match self {
            WssMethod::Bflux => "bflux",
            WssMethod::Cg1 => "cg1",
            WssMethod::Dg1 => "dg1",
            WssMethod::Dg0 => "dg0",
        }
    }

    pub fn parse(s: &str) -> Option<WssMethod> {
        WssMethod::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn space(self) -> BoundarySpaceKind {
        match self {
            WssMethod::Bflux | WssMethod::Cg1 => BoundarySpaceKind::Cg1,
            WssMethod::Dg1 => BoundarySpaceKind::Dg1,
            WssMethod::Dg0 => BoundarySpaceKind::Dg0,
        }
    }
}

impl fmt::Display for WssMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Part of a WSS field computed on one region. The field is defined on the
/// whole boundary space and is zero away from the piece's nodes.
#[derive(Clone, Debug)]
pub struct WssPiece {
    pub region: Vec<Tag>,
    /// Boundary facets of the region, ascending.
    pub facets: Vec<usize>,
    /// Space nodes carrying values, ascending.
    pub nodes: Vec<usize>,
    pub field: Field,
    /// Largest relative residual `|b - M tau| / |b|` of the mass solves.
    pub solve_residual: f64,
}

/// Wall shear stress on a boundary region, possibly assembled from
/// independently computed pieces (one per sub-region). Point values are
/// tangential: the facet-normal component is removed at evaluation.
#[derive(Clone, Debug)]
pub struct WssField {
    method: WssMethod,
    pieces: Vec<WssPiece>,
    /// For every boundary facet, the piece owning it.
    owner: Vec<Option<usize>>,
}

/// Area statistics of `|tau|` over a region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WssStats {
    pub max: f64,
    pub min: f64,
    /// Area-weighted mean of `|tau|`.
    pub avg: f64,
    pub area: f64,
}

/// Exact WSS as a function of position and outward facet normal.
pub type TraceFn<'a> = dyn Fn(Point, Point) -> [f64; 3] + Sync + 'a;

impl WssField {
    pub(crate) fn new(method: WssMethod, pieces: Vec<WssPiece>) -> Result<WssField> {
        let mesh = pieces
            .first()
            .ok_or_else(|| Error::EmptyRegion(Vec::new()))?
            .field
            .mesh()
            .clone();
        let mut owner = vec![None; mesh.boundary_facets().len()];
        for (k, p) in pieces.iter().enumerate() {
            for &f in &p.facets {
                if owner[f].replace(k).is_some() {
                    return Err(Error::InvalidArgument(format!("facet {f} belongs to two WSS pieces")));
                }
            }
        }
        Ok(WssField { method, pieces, owner })
    }

    /// Wraps a boundary-space field given on the facets of `region`, for
    /// instance a field interpolated from known values.
    pub fn from_field(method: WssMethod, region: &[Tag], field: Field) -> Result<WssField> {
        let space = field.space().clone();
        if space.dofmap().support() != Support::BoundaryFacets || space.kind() != method.space().element() {
            return Err(Error::InvalidArgument(format!(
                "a {method} field needs a boundary {} space",
                method.space().name()
            )));
        }
        let facets = field.mesh().facets_with_markers(region);
        if facets.is_empty() {
            return Err(Error::EmptyRegion(region.to_vec()));
        }
        let mut nodes: Vec<usize> = facets.iter().flat_map(|&f| space.facet_nodes(f).to_vec()).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let piece = WssPiece {
            region: region.to_vec(),
            facets,
            nodes,
            field,
            solve_residual: 0.0,
        };
        WssField::new(method, vec![piece])
    }

    /// Merges fields computed on disjoint regions.
    pub fn combine(parts: Vec<WssField>) -> Result<WssField> {
        let method = parts
            .first()
            .map(|p| p.method)
            .ok_or_else(|| Error::InvalidArgument("nothing to combine".into()))?;
        if parts.iter().any(|p| p.method != method) {
            return Err(Error::InvalidArgument("cannot combine WSS fields of different methods".into()));
        }
        WssField::new(method, parts.into_iter().flat_map(|p| p.pieces).collect())
    }

    pub fn method(&self) -> WssMethod {
        self.method
    }

    pub fn kind(&self) -> BoundarySpaceKind {
        self.method.space()
    }

    pub fn pieces(&self) -> &[WssPiece] {
        &self.pieces
    }

    pub fn mesh(&self) -> &Mesh {
        self.pieces[0].field.mesh()
    }

    pub fn region(&self) -> Vec<Tag> {
        let mut r: Vec<Tag> = self.pieces.iter().flat_map(|p| p.region.iter().copied()).collect();
        r.sort_unstable();
        r.dedup();
        r
    }

    /// Boundary facets covered by the field, ascending.
    pub fn facets(&self) -> Vec<usize> {
        (0..self.owner.len()).filter(|&f| self.owner[f].is_some()).collect()
    }

    /// Stored (not yet tangentially projected) value on a covered facet.
    pub fn raw_value(&self, facet: usize, eta: &[f64]) -> [f64; 3] {
        let k = self.owner[facet].expect("facet outside the WSS region");
        self.pieces[k].field.value_on_facet(facet, eta)
    }

    /// Tangential WSS at facet reference coordinates `eta`.
    pub fn value(&self, facet: usize, eta: &[f64]) -> Point {
        let n = self.mesh().boundary_facets()[facet].normal;
        tangential(&self.raw_value(facet, eta), &n)
    }

    /// Integrates `g(facet, eta, x, tau)` over the covered facets.
    fn integrate<G>(&self, degree: usize, g: G) -> f64
    where
        G: Fn(usize, &[f64], Point, Point) -> f64 + Sync,
    {
        let facets = self.facets();
        crate::fem::integrate_on_facets(self.mesh(), &facets, degree, |f, eta, x| g(f, eta, x, self.value(f, eta)))
    }

    /// `sqrt(int |tau - exact|^2 ds)` over the covered facets.
    pub fn l2_error(&self, exact: &TraceFn, degree: usize) -> f64 {
        let mesh = self.mesh();
        self.integrate(degree, |f, _, x, tau| {
            let e = exact(x, mesh.boundary_facets()[f].normal);
            (0..3).map(|i| (tau[i] - e[i]).powi(2)).sum()
        })
        .sqrt()
    }

    /// Like [`WssField::l2_error`] with an exact trace chosen by the
    /// boundary marker of each facet.
    pub fn l2_error_tagged(&self, exact: &(dyn Fn(Tag, Point, Point) -> [f64; 3] + Sync), degree: usize) -> f64 {
        let mesh = self.mesh();
        self.integrate(degree, |f, _, x, tau| {
            let bf = &mesh.boundary_facets()[f];
            let e = exact(bf.marker, x, bf.normal);
            (0..3).map(|i| (tau[i] - e[i]).powi(2)).sum()
        })
        .sqrt()
    }

    pub fn l2_norm(&self, degree: usize) -> f64 {
        self.integrate(degree, |_, _, _, tau| tau.iter().map(|t| t * t).sum()).sqrt()
    }

    /// `sqrt(int |tau - other|^2 ds)` over the facets covered by `self`.
    pub fn l2_difference(&self, other: &WssField, degree: usize) -> f64 {
        self.integrate(degree, |f, eta, _, tau| {
            let o = other.value(f, eta);
            (0..3).map(|i| (tau[i] - o[i]).powi(2)).sum()
        })
        .sqrt()
    }

    /// Facet-local reference coordinates of the nodes of a facet.
    fn node_etas(&self) -> Vec<[f64; 3]> {
        crate::fem::reference_nodes(self.kind().element(), self.mesh().dim() - 1)
    }
}

/// Max/min over nodal values of `|tau|` (facet values for DG0) and the
/// area-weighted mean of `|tau|`.
pub fn wss_stats(field: &WssField) -> Result<WssStats> {
    let facets = field.facets();
    if facets.is_empty() {
        return Err(Error::EmptyRegion(field.region()));
    }
    let etas = field.node_etas();
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for &f in &facets {
        for eta in &etas {
            let m = norm(&field.value(f, eta));
            max = max.max(m);
            min = min.min(m);
        }
    }
    let area: f64 = facets.iter().map(|&f| field.mesh().boundary_facets()[f].measure).sum();
    let integral = field.integrate(6, |_, _, _, tau| norm(&tau));
    let avg = (integral / area).clamp(min, max);
    Ok(WssStats { max, min, avg, area })
}

/// Low shear area: percentage of the region where `|tau| < 0.1 parent_mean`.
/// Facets are split into 3 (segments) or 4 (triangles) equal sub-cells, each
/// classified by the value at its centre; DG0 facets are classified whole.
pub fn lsa(field: &WssField, parent_mean: f64) -> Result<f64> {
    if !(parent_mean > 0.0) {
        return Err(Error::InvalidArgument(format!("parent mean must be positive, got {parent_mean}")));
    }
    let facets = field.facets();
    if facets.is_empty() {
        return Err(Error::EmptyRegion(field.region()));
    }
    let threshold = 0.1 * parent_mean;
    let dim = field.mesh().dim();
    let centres: Vec<[f64; 2]> = match (field.kind(), dim) {
        (BoundarySpaceKind::Dg0, 2) => vec![[0.5, 0.0]],
        (BoundarySpaceKind::Dg0, _) => vec![[1.0 / 3.0, 1.0 / 3.0]],
        (_, 2) => vec![[1.0 / 6.0, 0.0], [0.5, 0.0], [5.0 / 6.0, 0.0]],
        // Centroids of the four midpoint-subdivision triangles.
        _ => vec![
            [1.0 / 6.0, 1.0 / 6.0],
            [2.0 / 3.0, 1.0 / 6.0],
            [1.0 / 6.0, 2.0 / 3.0],
            [1.0 / 3.0, 1.0 / 3.0],
        ],
    };
    let mut low = 0.0;
    let mut total = 0.0;
    for &f in &facets {
        let measure = field.mesh().boundary_facets()[f].measure;
        total += measure;
        let sub = measure / centres.len() as f64;
        for c in &centres {
            if norm(&field.value(f, c)) < threshold {
                low += sub;
            }
        }
    }
    Ok(100.0 * low / total)
}

/// Quadrature degree used for WSS error norms.
pub const WSS_NORM_DEGREE: usize = 8;
