//! Node sets on the unit square and stencil construction.
//!
//! Node ordering contract: the first `n_boundary` nodes lie on the boundary
//! (perimeter traversal order), the rest are strictly interior. Each
//! boundary node carries exactly one condition tag.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Which boundary condition a boundary node enforces in the state solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BcTag {
    /// `B y = g`
    Dirichlet,
    /// `E y = 0`
    OperatorE,
}

/// How boundary tags are distributed along the perimeter traversal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TagPolicy {
    AllDirichlet,
    /// Repeats `dirichlet` Dirichlet tags followed by `operator_e` OperatorE tags.
    Cycle {
        dirichlet: usize,
        operator_e: usize,
    },
}

impl TagPolicy {
    pub const ALTERNATING: TagPolicy = TagPolicy::Cycle {
        dirichlet: 1,
        operator_e: 1,
    };

    fn tag(self, k: usize) -> BcTag {
        match self {
            TagPolicy::AllDirichlet => BcTag::Dirichlet,
            TagPolicy::Cycle {
                dirichlet,
                operator_e,
            } => {
                let period = dirichlet + operator_e;
                if period == 0 || k % period < dirichlet {
                    BcTag::Dirichlet
                } else {
                    BcTag::OperatorE
                }
            }
        }
    }
}

/// Which interior nodes are stencil centers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CenterPolicy {
    AllInterior,
    /// Every `stride`-th interior node (the last of each run) is not a center.
    Subset {
        stride: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Halton,
    Grid,
}

impl std::str::FromStr for Layout {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "halton" => Ok(Layout::Halton),
            "grid" => Ok(Layout::Grid),
            other => Err(format!("unknown layout '{other}'")),
        }
    }
}

impl Layout {
    pub fn as_str(self) -> &'static str {
        match self {
            Layout::Halton => "halton",
            Layout::Grid => "grid",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NodeOptions {
    pub n_target: usize,
    pub layout: Layout,
    pub tags: TagPolicy,
    pub centers: CenterPolicy,
    /// Offset into the Halton sequence.
    pub seed: u64,
}

impl NodeOptions {
    pub fn new(n_target: usize, layout: Layout) -> Self {
        NodeOptions {
            n_target,
            layout,
            tags: TagPolicy::ALTERNATING,
            centers: CenterPolicy::AllInterior,
            seed: 0,
        }
    }

    pub fn tags(mut self, tags: TagPolicy) -> Self {
        self.tags = tags;
        self
    }

    pub fn centers(mut self, centers: CenterPolicy) -> Self {
        self.centers = centers;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeSet {
    points: Vec<Point>,
    n_boundary: usize,
    tags: Vec<Option<BcTag>>,
    is_center: Vec<bool>,
}

fn on_boundary(p: Point) -> bool {
    p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0
}

fn strictly_inside(p: Point) -> bool {
    p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0
}

#[inline]
pub fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn dedup(points: Vec<Point>, seen: &mut HashSet<[u64; 2]>) -> Vec<Point> {
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        // +0.0 and -0.0 compare equal as coordinates
        let key = [(p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits()];
        if seen.insert(key) {
            out.push(p);
        }
    }
    out
}

impl NodeSet {
    /// Assembles a node set from boundary and interior points; exact
    /// duplicates are dropped (first occurrence kept).
    pub fn from_points(
        boundary: Vec<Point>,
        interior: Vec<Point>,
        tags: TagPolicy,
        centers: CenterPolicy,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(boundary.len() + interior.len());
        let boundary = dedup(boundary, &mut seen);
        let interior = dedup(interior, &mut seen);
        if let Some(p) = boundary
            .iter()
            .find(|p| !on_boundary(**p) || !in_square(**p))
        {
            return Err(Error::InvalidLayout(format!(
                "boundary node {p:?} is not on the unit square boundary"
            )));
        }
        if let Some(p) = interior.iter().find(|p| !strictly_inside(**p)) {
            return Err(Error::InvalidLayout(format!(
                "interior node {p:?} is not strictly inside"
            )));
        }
        let tag_list = (0..boundary.len()).map(|k| Some(tags.tag(k))).collect();
        let center_flags = (0..interior.len())
            .map(|j| match centers {
                CenterPolicy::AllInterior => true,
                CenterPolicy::Subset { stride } => stride < 2 || j % stride != stride - 1,
            })
            .collect();
        Self::from_parts(boundary, interior, tag_list, center_flags)
    }

    fn from_parts(
        boundary: Vec<Point>,
        interior: Vec<Point>,
        boundary_tags: Vec<Option<BcTag>>,
        interior_centers: Vec<bool>,
    ) -> Result<Self> {
        let n_boundary = boundary.len();
        let n = n_boundary + interior.len();
        if interior.is_empty() {
            return Err(Error::InvalidLayout(
                "node set has no interior nodes".into(),
            ));
        }
        let mut tags = boundary_tags;
        tags.resize(n, None);
        let mut is_center = vec![false; n_boundary];
        is_center.extend(interior_centers);
        let mut points = boundary;
        points.extend(interior);
        Ok(NodeSet {
            points,
            n_boundary,
            tags,
            is_center,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn n_boundary(&self) -> usize {
        self.n_boundary
    }

    #[inline]
    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    #[inline]
    pub fn is_boundary(&self, i: usize) -> bool {
        i < self.n_boundary
    }

    #[inline]
    pub fn tag(&self, i: usize) -> Option<BcTag> {
        self.tags[i]
    }

    #[inline]
    pub fn is_center(&self, i: usize) -> bool {
        self.is_center[i]
    }

    /// Global ids of the centers, in increasing order.
    pub fn centers(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_center[i]).collect()
    }

    pub fn interior(&self) -> std::ops::Range<usize> {
        self.n_boundary..self.len()
    }

    /// Same nodes with every boundary node tagged Dirichlet.
    pub fn with_all_dirichlet(&self) -> Self {
        let mut out = self.clone();
        for t in &mut out.tags[..self.n_boundary] {
            *t = Some(BcTag::Dirichlet);
        }
        out
    }

    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.min(dist2(self.points[i], self.points[j]));
            }
        }
        best.sqrt()
    }

    /// Writes `x,y,is_boundary,bc_tag,is_center` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["x", "y", "is_boundary", "bc_tag", "is_center"])?;
        for i in 0..self.len() {
            let p = self.points[i];
            let tag = match self.tags[i] {
                Some(BcTag::Dirichlet) => "D",
                Some(BcTag::OperatorE) => "E",
                None => "-",
            };
            wtr.write_record([
                format!("{:e}", p[0]),
                format!("{:e}", p[1]),
                (self.is_boundary(i) as u8).to_string(),
                tag.to_string(),
                (self.is_center[i] as u8).to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads the CSV written by [`NodeSet::write_csv`]. Boundary rows may
    /// appear anywhere; they are moved to the front in file order.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut boundary = Vec::new();
        let mut btags = Vec::new();
        let mut interior = Vec::new();
        let mut centers = Vec::new();
        let bad = |msg: String| Error::InvalidLayout(msg);
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 5 {
                return Err(bad(format!(
                    "row {line}: expected 5 fields, found {}",
                    rec.len()
                )));
            }
            let x: f64 = rec[0]
                .trim()
                .parse()
                .map_err(|_| bad(format!("row {line}: bad x")))?;
            let y: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|_| bad(format!("row {line}: bad y")))?;
            let is_b =
                parse_flag(&rec[2]).ok_or_else(|| bad(format!("row {line}: bad is_boundary")))?;
            let is_c =
                parse_flag(&rec[4]).ok_or_else(|| bad(format!("row {line}: bad is_center")))?;
            if is_b {
                let tag = match rec[3].trim() {
                    "D" => BcTag::Dirichlet,
                    "E" => BcTag::OperatorE,
                    other => {
                        return Err(bad(format!(
                            "row {line}: boundary node needs tag D or E, found '{other}'"
                        )))
                    }
                };
                if !on_boundary([x, y]) || !in_square([x, y]) {
                    return Err(bad(format!("row {line}: boundary node off the boundary")));
                }
                boundary.push([x, y]);
                btags.push(Some(tag));
            } else {
                if !strictly_inside([x, y]) {
                    return Err(bad(format!(
                        "row {line}: interior node not strictly inside"
                    )));
                }
                interior.push([x, y]);
                centers.push(is_c);
            }
        }
        Self::from_parts(boundary, interior, btags, centers)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

fn in_square(p: Point) -> bool {
    (0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1])
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.trim() {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Equispaced perimeter nodes, `m` segments per side, counterclockwise from the origin.
fn perimeter(m: usize) -> Vec<Point> {
    let h = 1.0 / m as f64;
    let mut pts = Vec::with_capacity(4 * m);
    for i in 0..m {
        pts.push([i as f64 * h, 0.0]);
    }
    for i in 0..m {
        pts.push([1.0, i as f64 * h]);
    }
    for i in 0..m {
        pts.push([1.0 - i as f64 * h, 1.0]);
    }
    for i in 0..m {
        pts.push([0.0, 1.0 - i as f64 * h]);
    }
    pts
}

/// Generates a node set of (about) `n_target` nodes on the unit square.
///
/// Boundary nodes are equispaced on the perimeter with the four corners
/// included, `m = round(sqrt(n)) - 1` segments per side. The grid layout
/// needs a perfect square; the Halton layout fills the interior from the
/// (2, 3) Halton sequence, dropping points within half a boundary spacing
/// of the boundary.
pub fn generate_nodes(opts: &NodeOptions) -> Result<NodeSet> {
    let n = opts.n_target;
    if n < 9 {
        return Err(Error::InvalidLayout(format!(
            "need at least 9 nodes, got {n}"
        )));
    }
    match opts.layout {
        Layout::Grid => {
            let k = (n as f64).sqrt().round() as usize;
            if k * k != n {
                return Err(Error::InvalidLayout(format!(
                    "grid layout needs a perfect square, got {n}"
                )));
            }
            let m = k - 1;
            let h = 1.0 / m as f64;
            let mut interior = Vec::with_capacity((m - 1) * (m - 1));
            for j in 1..m {
                for i in 1..m {
                    interior.push([i as f64 * h, j as f64 * h]);
                }
            }
            NodeSet::from_points(perimeter(m), interior, opts.tags, opts.centers)
        }
        Layout::Halton => {
            let m = ((n as f64).sqrt().round() as usize)
                .saturating_sub(1)
                .max(2);
            let boundary = perimeter(m);
            let n_interior = n - boundary.len();
            let margin = 0.5 / m as f64;
            let mut interior = Vec::with_capacity(n_interior);
            let mut idx = 1 + opts.seed;
            while interior.len() < n_interior {
                let p = [radical_inverse(idx, 2), radical_inverse(idx, 3)];
                idx += 1;
                if p[0].min(1.0 - p[0]).min(p[1]).min(1.0 - p[1]) >= margin {
                    interior.push(p);
                }
            }
            NodeSet::from_points(boundary, interior, opts.tags, opts.centers)
        }
    }
}

/// Ids of the `k` nodes nearest to `p`, ordered by distance then id.
pub fn nearest(nodes: &NodeSet, p: Point, k: usize) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = nodes
        .points
        .iter()
        .enumerate()
        .map(|(i, &q)| (dist2(p, q), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let k = k.min(keyed.len());
    if k < keyed.len() && k > 0 {
        keyed.select_nth_unstable_by(k - 1, cmp);
        keyed.truncate(k);
    }
    keyed.sort_by(cmp);
    keyed.truncate(k);
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Stencil role of a member node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MemberRole {
    Center,
    Dirichlet,
    OperatorE,
    Interior,
}

/// The neighborhood of one center, ordered
/// `[centers | Dirichlet boundary | OperatorE boundary | non-center interior]`
/// with the owning center first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stencil {
    pub center: usize,
    pub members: Vec<usize>,
    pub n_centers: usize,
    pub n_dirichlet: usize,
    pub n_operator_e: usize,
    pub n_interior: usize,
}

impl Stencil {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn n_boundary(&self) -> usize {
        self.n_dirichlet + self.n_operator_e
    }

    pub fn role(&self, pos: usize) -> MemberRole {
        if pos < self.n_centers {
            MemberRole::Center
        } else if pos < self.n_centers + self.n_dirichlet {
            MemberRole::Dirichlet
        } else if pos < self.n_centers + self.n_boundary() {
            MemberRole::OperatorE
        } else {
            MemberRole::Interior
        }
    }
}

fn role_of(nodes: &NodeSet, id: usize) -> MemberRole {
    if nodes.is_center(id) {
        MemberRole::Center
    } else {
        match nodes.tag(id) {
            Some(BcTag::Dirichlet) => MemberRole::Dirichlet,
            Some(BcTag::OperatorE) => MemberRole::OperatorE,
            None => MemberRole::Interior,
        }
    }
}

/// `n_local` nearest nodes of a center, reordered by role (stable in distance).
pub fn build_stencil(nodes: &NodeSet, center: usize, n_local: usize) -> Result<Stencil> {
    if center >= nodes.len() || !nodes.is_center(center) {
        return Err(Error::InvalidLayout(format!(
            "node {center} is not a center"
        )));
    }
    if n_local == 0 || n_local > nodes.len() {
        return Err(Error::TooFewNodes {
            requested: n_local,
            available: nodes.len(),
        });
    }
    let near = nearest(nodes, nodes.point(center), n_local);
    let mut by_role: [Vec<usize>; 4] = Default::default();
    by_role[0].push(center);
    for &id in &near {
        if id == center {
            continue;
        }
        let slot = match role_of(nodes, id) {
            MemberRole::Center => 0,
            MemberRole::Dirichlet => 1,
            MemberRole::OperatorE => 2,
            MemberRole::Interior => 3,
        };
        by_role[slot].push(id);
    }
    // nodes are distinct, so the center is its own nearest neighbor
    debug_assert_eq!(by_role.iter().map(Vec::len).sum::<usize>(), n_local);
    let [c, d, e, i] = by_role;
    let stencil = Stencil {
        center,
        n_centers: c.len(),
        n_dirichlet: d.len(),
        n_operator_e: e.len(),
        n_interior: i.len(),
        members: c.into_iter().chain(d).chain(e).chain(i).collect(),
    };
    Ok(stencil)
}

/// Largest distance from a 201 x 201 probe grid to the nearest node.
pub fn fill_distance(nodes: &NodeSet) -> f64 {
    const PROBES: usize = 201;
    let mut worst: f64 = 0.0;
    for a in 0..PROBES {
        for b in 0..PROBES {
            let p = [
                a as f64 / (PROBES - 1) as f64,
                b as f64 / (PROBES - 1) as f64,
            ];
            let d = nodes
                .points
                .iter()
                .map(|&q| dist2(p, q))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    worst.sqrt()
}
