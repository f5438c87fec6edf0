//! Conforming triangulation of the truncated period cell with region/boundary
//! tags, periodic pairing and newest-vertex bisection.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::config::{ConfigError, PmlConfig, ProblemConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid mesh size h0 = {0}")]
    BadSize(f64),
    #[error("element id {0} out of range")]
    BadElement(usize),
    #[error("refinement closure did not terminate within {0} steps")]
    ClosureDivergence(usize),
    #[error("edge shared by more than two elements: nodes {0:?}")]
    NonManifold([usize; 2]),
    #[error("boundary edge {0:?} lies on no outer boundary")]
    OpenEdge([usize; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Fluid,
    FluidPml,
    Solid,
    SolidPml,
}

impl Region {
    pub fn is_fluid(self) -> bool {
        matches!(self, Region::Fluid | Region::FluidPml)
    }

    pub fn is_pml(self) -> bool {
        matches!(self, Region::FluidPml | Region::SolidPml)
    }

    pub fn code(self) -> i32 {
        match self {
            Region::SolidPml => 0,
            Region::Solid => 1,
            Region::Fluid => 2,
            Region::FluidPml => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeTag {
    Interior,
    Interface,
    Left,
    Right,
    GammaPlus,
    GammaMinus,
    DirichletTop,
    DirichletBottom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub x: [f64; 2],
    pub on_left: bool,
    pub on_right: bool,
    pub on_interface: bool,
    pub on_gamma_plus_pml: bool,
    pub on_gamma_minus_pml: bool,
    pub periodic_partner: Option<usize>,
}

/// Triangle stored as [v0, v1, v2] counter-clockwise; v0 is the newest vertex
/// and (v1, v2) the refinement edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub nodes: [usize; 3],
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshEdge {
    pub nodes: [usize; 2],
    pub elements: (usize, Option<usize>),
    pub length: f64,
    pub tag: EdgeTag,
    pub partner: Option<usize>,
}

/// Outer geometry the mesh was generated for.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub period: f64,
    pub h1: f64,
    pub h2: f64,
    pub top: f64,
    pub bottom: f64,
    pub profile: Vec<[f64; 2]>,
}

impl Geometry {
    pub fn profile_height(&self, x1: f64) -> f64 {
        let p = &self.profile;
        let k = p.partition_point(|v| v[0] <= x1).clamp(1, p.len() - 1);
        let (a, b) = (p[k - 1], p[k]);
        a[1] + (x1 - a[0]) / (b[0] - a[0]) * (b[1] - a[1])
    }

    pub fn area(&self) -> f64 {
        self.period * (self.top - self.bottom)
    }

    /// Interior corners of the interface polyline (vertices where the slope changes);
    /// the seam vertex at x1 = 0 and x1 = Λ is reported once, at x1 = 0.
    pub fn corners(&self) -> Vec<[f64; 2]> {
        let p = &self.profile;
        let slope = |a: [f64; 2], b: [f64; 2]| (b[1] - a[1]) / (b[0] - a[0]);
        let n = p.len();
        let mut out = Vec::new();
        if slope(p[0], p[1]) != slope(p[n - 2], p[n - 1]) {
            out.push(p[0]);
        }
        for k in 1..n - 1 {
            if slope(p[k - 1], p[k]) != slope(p[k], p[k + 1]) {
                out.push(p[k]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Node>,
    pub elements: Vec<Element>,
    pub edges: Vec<MeshEdge>,
    pub geometry: Geometry,
    edge_index: HashMap<(usize, usize), usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveArea { element: usize, area: f64 },
    NonConforming { nodes: [usize; 2], adjacent: usize },
    RegionImpurity { element: usize },
    NodeTag { node: usize, what: &'static str },
    EdgeTag { edge: usize, what: &'static str },
    PeriodicPairing { nodes: Vec<usize> },
    EdgePairing { edge: usize },
    InterfacePolyline { what: &'static str },
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn band(n: usize, lo: f64, hi: f64, k: usize) -> f64 {
    if k == n {
        hi
    } else {
        lo + (hi - lo) * k as f64 / n as f64
    }
}

/// Structured column mesh: profile vertices become column breakpoints, and each
/// column is split into four bands (solid PML, solid, fluid, fluid PML) with a
/// fixed layer count per band, so every band boundary is a union of edges.
pub fn generate_initial_mesh(
    cfg: &ProblemConfig,
    pml: &PmlConfig,
    h0: f64,
) -> Result<Mesh, MeshError> {
    cfg.check()?;
    pml.check()?;
    if !(h0.is_finite() && h0 > 0.0) {
        return Err(MeshError::BadSize(h0));
    }
    let p = &cfg.profile;
    let mut xs = vec![0.0];
    let mut fs = vec![p[0][1]];
    for w in p.windows(2) {
        let n = ((w[1][0] - w[0][0]) / h0).ceil().max(1.0) as usize;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            xs.push(if k == n {
                w[1][0]
            } else {
                w[0][0] + t * (w[1][0] - w[0][0])
            });
            fs.push(if k == n {
                w[1][1]
            } else {
                w[0][1] + t * (w[1][1] - w[0][1])
            });
        }
    }
    let cols = xs.len() - 1;
    // Exact seam: the right column mirrors the left one.
    xs[cols] = cfg.period;
    fs[cols] = fs[0];

    let top = cfg.h1 + pml.delta1;
    let bottom = cfg.h2 - pml.delta2;
    let fmax = fs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let fmin = fs.iter().cloned().fold(f64::INFINITY, f64::min);
    let layers = |len: f64| (len / h0).ceil().max(1.0) as usize;
    let nb = [
        layers(pml.delta2),
        layers(fmax - cfg.h2),
        layers(cfg.h1 - fmin),
        layers(pml.delta1),
    ];
    let regions = [
        Region::SolidPml,
        Region::Solid,
        Region::Fluid,
        Region::FluidPml,
    ];
    let rows: usize = nb.iter().sum();

    let mut nodes = Vec::with_capacity((cols + 1) * (rows + 1));
    for (i, &x) in xs.iter().enumerate() {
        let bounds = [bottom, cfg.h2, fs[i], cfg.h1, top];
        nodes.push(bare_node([x, bottom]));
        for (b, &n) in nb.iter().enumerate() {
            for k in 1..=n {
                nodes.push(bare_node([x, band(n, bounds[b], bounds[b + 1], k)]));
            }
        }
    }
    let id = |i: usize, j: usize| i * (rows + 1) + j;
    let mut elements = Vec::with_capacity(2 * cols * rows);
    for i in 0..cols {
        let mut j = 0;
        for (b, &n) in nb.iter().enumerate() {
            for _ in 0..n {
                let (a, bb, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                // Both halves share the diagonal a–c as refinement edge.
                elements.push(Element {
                    nodes: [bb, c, a],
                    region: regions[b],
                });
                elements.push(Element {
                    nodes: [d, a, c],
                    region: regions[b],
                });
                j += 1;
            }
        }
    }
    let geometry = Geometry {
        period: cfg.period,
        h1: cfg.h1,
        h2: cfg.h2,
        top,
        bottom,
        profile: cfg.profile.clone(),
    };
    Mesh::from_parts(nodes, elements, geometry)
}

fn bare_node(x: [f64; 2]) -> Node {
    Node {
        x,
        on_left: false,
        on_right: false,
        on_interface: false,
        on_gamma_plus_pml: false,
        on_gamma_minus_pml: false,
        periodic_partner: None,
    }
}

impl Mesh {
    /// Builds edges, tags and periodic partners from raw nodes and elements.
    pub fn from_parts(
        nodes: Vec<Node>,
        elements: Vec<Element>,
        geometry: Geometry,
    ) -> Result<Mesh, MeshError> {
        let mut mesh = Mesh {
            nodes,
            elements,
            edges: Vec::new(),
            geometry,
            edge_index: HashMap::new(),
        };
        mesh.rebuild()?;
        Ok(mesh)
    }

    fn rebuild(&mut self) -> Result<(), MeshError> {
        let g = &self.geometry;
        for n in &mut self.nodes {
            n.on_left = n.x[0] == 0.0;
            n.on_right = n.x[0] == g.period;
            n.on_gamma_plus_pml = n.x[1] == g.top;
            n.on_gamma_minus_pml = n.x[1] == g.bottom;
            n.on_interface = false;
            n.periodic_partner = None;
        }
        self.edges.clear();
        self.edge_index.clear();
        for (e, el) in self.elements.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (el.nodes[(k + 1) % 3], el.nodes[(k + 2) % 3]);
                match self.edge_index.get(&key(a, b)) {
                    Some(&i) => {
                        let edge = &mut self.edges[i];
                        if edge.elements.1.is_some() {
                            return Err(MeshError::NonManifold([a, b]));
                        }
                        edge.elements.1 = Some(e);
                    }
                    None => {
                        let (pa, pb) = (self.nodes[a].x, self.nodes[b].x);
                        self.edge_index.insert(key(a, b), self.edges.len());
                        self.edges.push(MeshEdge {
                            nodes: [a, b],
                            elements: (e, None),
                            length: (pb[0] - pa[0]).hypot(pb[1] - pa[1]),
                            tag: EdgeTag::Interior,
                            partner: None,
                        });
                    }
                }
            }
        }
        for i in 0..self.edges.len() {
            let tag = self.classify(i)?;
            self.edges[i].tag = tag;
            if tag == EdgeTag::Interface {
                for n in self.edges[i].nodes {
                    self.nodes[n].on_interface = true;
                }
            }
        }
        // Periodic node partners by exact height matching.
        let right: HashMap<u64, usize> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.on_right)
            .map(|(i, n)| (n.x[1].to_bits(), i))
            .collect();
        for i in 0..self.nodes.len() {
            if self.nodes[i].on_left {
                if let Some(&j) = right.get(&self.nodes[i].x[1].to_bits()) {
                    self.nodes[i].periodic_partner = Some(j);
                    self.nodes[j].periodic_partner = Some(i);
                }
            }
        }
        for i in 0..self.edges.len() {
            if matches!(self.edges[i].tag, EdgeTag::Left | EdgeTag::Right) {
                let [a, b] = self.edges[i].nodes;
                if let (Some(pa), Some(pb)) = (
                    self.nodes[a].periodic_partner,
                    self.nodes[b].periodic_partner,
                ) {
                    self.edges[i].partner = self.edge_index.get(&key(pa, pb)).copied();
                }
            }
        }
        Ok(())
    }

    fn classify(&self, i: usize) -> Result<EdgeTag, MeshError> {
        let e = &self.edges[i];
        if let Some(o) = e.elements.1 {
            let (r1, r2) = (self.elements[e.elements.0].region, self.elements[o].region);
            return Ok(match (r1, r2) {
                _ if r1 == r2 => EdgeTag::Interior,
                _ if r1.is_fluid() != r2.is_fluid() => EdgeTag::Interface,
                _ if r1.is_fluid() => EdgeTag::GammaPlus,
                _ => EdgeTag::GammaMinus,
            });
        }
        let g = &self.geometry;
        let [a, b] = e.nodes.map(|n| self.nodes[n].x);
        Ok(if a[0] == 0.0 && b[0] == 0.0 {
            EdgeTag::Left
        } else if a[0] == g.period && b[0] == g.period {
            EdgeTag::Right
        } else if a[1] == g.top && b[1] == g.top {
            EdgeTag::DirichletTop
        } else if a[1] == g.bottom && b[1] == g.bottom {
            EdgeTag::DirichletBottom
        } else {
            return Err(MeshError::OpenEdge(e.nodes));
        })
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&key(a, b)).copied()
    }

    pub fn coords(&self, e: usize) -> [[f64; 2]; 3] {
        self.elements[e].nodes.map(|n| self.nodes[n].x)
    }

    pub fn area(&self, e: usize) -> f64 {
        signed_area(&self.coords(e))
    }

    /// Element diameter h_T (longest edge).
    pub fn diameter(&self, e: usize) -> f64 {
        let c = self.coords(e);
        (0..3)
            .map(|k| {
                let (a, b) = (c[k], c[(k + 1) % 3]);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .fold(0.0, f64::max)
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let c = self.coords(e);
        [
            (c[0][0] + c[1][0] + c[2][0]) / 3.0,
            (c[0][1] + c[1][1] + c[2][1]) / 3.0,
        ]
    }

    /// The (up to three) edge ids of an element, in local order opposite v0, v1, v2.
    pub fn element_edges(&self, e: usize) -> [usize; 3] {
        let n = self.elements[e].nodes;
        [0, 1, 2].map(|k| self.edge_index[&key(n[(k + 1) % 3], n[(k + 2) % 3])])
    }

    pub fn min_angle(&self) -> f64 {
        (0..self.elements.len())
            .map(|e| {
                let c = self.coords(e);
                (0..3)
                    .map(|k| {
                        let (p, a, b) = (c[k], c[(k + 1) % 3], c[(k + 2) % 3]);
                        let u = [a[0] - p[0], a[1] - p[1]];
                        let v = [b[0] - p[0], b[1] - p[1]];
                        let cos =
                            (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
                        cos.clamp(-1.0, 1.0).acos()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Newest-vertex bisection of the marked elements plus conformity closure.
    /// Periodic partner edges on the left/right boundaries are split together.
    pub fn bisect(&self, marked: &[usize]) -> Result<Mesh, MeshError> {
        if let Some(&bad) = marked.iter().find(|&&e| e >= self.elements.len()) {
            return Err(MeshError::BadElement(bad));
        }
        let ref_edge = |e: usize| {
            let n = self.elements[e].nodes;
            self.edge_index[&key(n[1], n[2])]
        };
        let mut is_marked = vec![false; self.edges.len()];
        let mut order = Vec::new();
        let mut work: Vec<usize> = marked.iter().map(|&e| ref_edge(e)).collect();
        work.reverse();
        let cap = 4 * self.edges.len() + marked.len() + 16;
        let mut steps = 0;
        while let Some(ed) = work.pop() {
            steps += 1;
            if steps > cap {
                return Err(MeshError::ClosureDivergence(cap));
            }
            if is_marked[ed] {
                continue;
            }
            is_marked[ed] = true;
            order.push(ed);
            let edge = &self.edges[ed];
            for el in std::iter::once(edge.elements.0).chain(edge.elements.1) {
                work.push(ref_edge(el));
            }
            if let Some(p) = edge.partner {
                work.push(p);
            }
        }

        let mut nodes = self.nodes.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::with_capacity(order.len());
        for &ed in &order {
            let [a, b] = self.edges[ed].nodes;
            let (pa, pb) = (self.nodes[a].x, self.nodes[b].x);
            mid.insert(key(a, b), nodes.len());
            nodes.push(bare_node([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]));
        }
        let mut elements = Vec::with_capacity(self.elements.len() + 2 * order.len());
        for el in &self.elements {
            split(*el, &mid, &mut elements);
        }
        Mesh::from_parts(nodes, elements, self.geometry.clone())
    }

    /// Checks every structural invariant; an empty list means the mesh is valid.
    pub fn audit(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let g = &self.geometry;
        let tol = 1e-12 * (1.0 + g.top.abs().max(g.bottom.abs()).max(g.period));

        for e in 0..self.elements.len() {
            let a = self.area(e);
            if !(a > 0.0) {
                out.push(Violation::NonPositiveArea {
                    element: e,
                    area: a,
                });
            }
            if !self.region_pure(e, tol) {
                out.push(Violation::RegionImpurity { element: e });
            }
        }

        // Conformity from scratch (independent of the stored edge list).
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        let mut seen = Vec::new();
        for el in &self.elements {
            for k in 0..3 {
                let kk = key(el.nodes[k], el.nodes[(k + 1) % 3]);
                let c = count.entry(kk).or_insert(0);
                if *c == 0 {
                    seen.push(kk);
                }
                *c += 1;
            }
        }
        for kk in seen {
            let c = count[&kk];
            let on_outer = |x: [f64; 2], y: [f64; 2]| {
                (x[0] == 0.0 && y[0] == 0.0)
                    || (x[0] == g.period && y[0] == g.period)
                    || (x[1] == g.top && y[1] == g.top)
                    || (x[1] == g.bottom && y[1] == g.bottom)
            };
            if c > 2 || (c == 1 && !on_outer(self.nodes[kk.0].x, self.nodes[kk.1].x)) {
                out.push(Violation::NonConforming {
                    nodes: [kk.0, kk.1],
                    adjacent: c,
                });
            }
        }

        for (i, n) in self.nodes.iter().enumerate() {
            if n.on_left != (n.x[0] == 0.0) {
                out.push(Violation::NodeTag {
                    node: i,
                    what: "left flag",
                });
            }
            if n.on_right != (n.x[0] == g.period) {
                out.push(Violation::NodeTag {
                    node: i,
                    what: "right flag",
                });
            }
            if n.on_gamma_plus_pml != (n.x[1] == g.top) {
                out.push(Violation::NodeTag {
                    node: i,
                    what: "top flag",
                });
            }
            if n.on_gamma_minus_pml != (n.x[1] == g.bottom) {
                out.push(Violation::NodeTag {
                    node: i,
                    what: "bottom flag",
                });
            }
            if n.on_interface && (n.x[1] - g.profile_height(n.x[0])).abs() > tol {
                out.push(Violation::NodeTag {
                    node: i,
                    what: "interface node off the profile",
                });
            }
        }
        for (i, e) in self.edges.iter().enumerate() {
            let [a, b] = e.nodes.map(|n| self.nodes[n].x);
            let bad = match e.tag {
                EdgeTag::Interface => {
                    let m = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                    [a, b, m]
                        .iter()
                        .any(|p| (p[1] - g.profile_height(p[0])).abs() > tol)
                }
                EdgeTag::GammaPlus => a[1] != g.h1 || b[1] != g.h1,
                EdgeTag::GammaMinus => a[1] != g.h2 || b[1] != g.h2,
                EdgeTag::Left => a[0] != 0.0 || b[0] != 0.0,
                EdgeTag::Right => a[0] != g.period || b[0] != g.period,
                EdgeTag::DirichletTop => a[1] != g.top || b[1] != g.top,
                EdgeTag::DirichletBottom => a[1] != g.bottom || b[1] != g.bottom,
                EdgeTag::Interior => false,
            };
            if bad {
                out.push(Violation::EdgeTag {
                    edge: i,
                    what: "tag inconsistent with coordinates",
                });
            }
            if matches!(e.tag, EdgeTag::Left | EdgeTag::Right) {
                let ok = e.partner.is_some_and(|p| {
                    let q = &self.edges[p];
                    let ya = [a[1], b[1]];
                    let yb = q.nodes.map(|n| self.nodes[n].x[1]);
                    q.partner == Some(i)
                        && q.tag != e.tag
                        && (q.length - e.length).abs() <= tol
                        && (ya[0].min(ya[1]) - yb[0].min(yb[1])).abs() <= tol
                        && (ya[0].max(ya[1]) - yb[0].max(yb[1])).abs() <= tol
                });
                if !ok {
                    out.push(Violation::EdgePairing { edge: i });
                }
            }
        }
        out.extend(self.pairing_violations());
        out.extend(self.interface_violations());
        out
    }

    fn region_pure(&self, e: usize, tol: f64) -> bool {
        let g = &self.geometry;
        let c = self.coords(e);
        let cen = self.centroid(e);
        let inside = |p: &[f64; 2]| {
            let f = g.profile_height(p[0]);
            let y = p[1];
            match self.elements[e].region {
                Region::Fluid => y >= f - tol && y <= g.h1 + tol,
                Region::FluidPml => y >= g.h1 - tol && y <= g.top + tol,
                Region::Solid => y >= g.h2 - tol && y <= f + tol,
                Region::SolidPml => y >= g.bottom - tol && y <= g.h2 + tol,
            }
        };
        c.iter().all(inside) && inside(&cen)
    }

    /// One violation per connected group of inconsistent periodic links.
    fn pairing_violations(&self) -> Vec<Violation> {
        let n = self.nodes.len();
        let consistent = |i: usize| {
            let node = &self.nodes[i];
            match node.periodic_partner {
                None => !(node.on_left || node.on_right),
                Some(j) => {
                    let q = &self.nodes[j];
                    q.periodic_partner == Some(i)
                        && q.x[1] == node.x[1]
                        && ((node.on_left && q.on_right) || (node.on_right && q.on_left))
                }
            }
        };
        let bad: Vec<usize> = (0..n).filter(|&i| !consistent(i)).collect();
        if bad.is_empty() {
            return Vec::new();
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let Some(j) = node.periodic_partner {
                if j < n {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        // Nodes on opposite sides at the same height belong to the same slot even without links.
        let mut by_height: HashMap<u64, usize> = HashMap::new();
        for &i in &bad {
            let h = self.nodes[i].x[1].to_bits();
            if let Some(&j) = by_height.get(&h) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            } else {
                by_height.insert(h, i);
            }
        }
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for &i in &bad {
            let r = find(&mut parent, i);
            match groups.iter_mut().find(|(root, _)| *root == r) {
                Some((_, v)) => v.push(i),
                None => groups.push((r, vec![i])),
            }
        }
        groups
            .into_iter()
            .map(|(_, nodes)| Violation::PeriodicPairing { nodes })
            .collect()
    }

    fn interface_violations(&self) -> Vec<Violation> {
        let g = &self.geometry;
        let iface: Vec<&MeshEdge> = self
            .edges
            .iter()
            .filter(|e| e.tag == EdgeTag::Interface)
            .collect();
        if iface.is_empty() {
            return vec![Violation::InterfacePolyline {
                what: "no interface edges",
            }];
        }
        let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
        for (k, e) in iface.iter().enumerate() {
            for n in e.nodes {
                adj.entry(n).or_default().push(k);
            }
        }
        let ends: Vec<usize> = adj
            .iter()
            .filter(|(_, v)| v.len() == 1)
            .map(|(&n, _)| n)
            .collect();
        if adj.values().any(|v| v.len() > 2) || ends.len() != 2 {
            return vec![Violation::InterfacePolyline {
                what: "interface edges do not form a simple open chain",
            }];
        }
        let Some(&start) = ends.iter().find(|&&n| self.nodes[n].x[0] == 0.0) else {
            return vec![Violation::InterfacePolyline {
                what: "chain does not start at x1 = 0",
            }];
        };
        let (mut cur, mut prev_edge, mut visited) = (start, usize::MAX, 0);
        loop {
            let next = adj[&cur].iter().copied().find(|&k| k != prev_edge);
            let Some(k) = next else { break };
            visited += 1;
            let [a, b] = iface[k].nodes;
            cur = if a == cur { b } else { a };
            prev_edge = k;
            if visited > iface.len() {
                break;
            }
        }
        if visited != iface.len() {
            return vec![Violation::InterfacePolyline {
                what: "interface chain is disconnected",
            }];
        }
        if self.nodes[cur].x[0] != g.period {
            return vec![Violation::InterfacePolyline {
                what: "chain does not end at x1 = period",
            }];
        }
        Vec::new()
    }
}

fn split(el: Element, mid: &HashMap<(usize, usize), usize>, out: &mut Vec<Element>) {
    let [v0, v1, v2] = el.nodes;
    match mid.get(&key(v1, v2)) {
        Some(&m) => {
            split(
                Element {
                    nodes: [m, v0, v1],
                    region: el.region,
                },
                mid,
                out,
            );
            split(
                Element {
                    nodes: [m, v2, v0],
                    region: el.region,
                },
                mid,
                out,
            );
        }
        None => out.push(el),
    }
}

pub fn signed_area(c: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]))
}

/// Marks every element; used for uniform refinement.
pub fn all_elements(mesh: &Mesh) -> Vec<usize> {
    (0..mesh.elements.len()).collect()
}

/// Elements whose centroid lies within `radius` of `point`, measured periodically in x1.
pub fn near(mesh: &Mesh, point: [f64; 2], radius: f64) -> HashSet<usize> {
    let l = mesh.geometry.period;
    (0..mesh.elements.len())
        .filter(|&e| {
            let c = mesh.centroid(e);
            let dx = (c[0] - point[0]).rem_euclid(l);
            let dx = dx.min(l - dx);
            dx.hypot(c[1] - point[1]) <= radius
        })
        .collect()
}
