//! Discrete PML system: P1 element matrices, fluid–solid coupling on the
//! interface, incident-wave load, and elimination of quasi-periodic slaves and
//! Dirichlet dofs on the outer PML boundaries.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::config::{self, Medium, PmlConfig, ProblemConfig};
use crate::mesh::{EdgeTag, Mesh};
use crate::quadrature::{self, TriPoint};
use crate::sparse::CsrMatrix;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("interface edge {edge}: normal orientation is inconsistent with the adjacent regions")]
    Orientation { edge: usize },
}

/// The incoming plane wave p^in = A·e^{i(αx1 − βx2)}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    pub alpha: f64,
    pub beta: f64,
    pub amplitude: f64,
}

impl PlaneWave {
    pub fn incident(cfg: &ProblemConfig) -> Self {
        let d = config::derive(cfg);
        PlaneWave {
            alpha: d.alpha,
            beta: d.beta,
            amplitude: 1.0,
        }
    }

    pub fn none() -> Self {
        PlaneWave {
            alpha: 0.0,
            beta: 0.0,
            amplitude: 0.0,
        }
    }

    pub fn value(&self, x: [f64; 2]) -> C64 {
        self.amplitude * (I * (self.alpha * x[0] - self.beta * x[1])).exp()
    }

    pub fn grad(&self, x: [f64; 2]) -> [C64; 2] {
        let p = self.value(x);
        [I * self.alpha * p, -I * self.beta * p]
    }
}

pub fn stretch(x2: f64, cfg: &ProblemConfig, pml: &PmlConfig) -> C64 {
    pml.medium(cfg).s(x2)
}

/// Area and gradients of the three barycentric functions.
pub fn p1_gradients(c: &[[f64; 2]; 3]) -> Result<(f64, [[f64; 2]; 3]), AssemblyError> {
    let area = crate::mesh::signed_area(c);
    if !(area > 0.0) {
        return Err(AssemblyError::Geometry(format!(
            "degenerate or inverted element, area {area:e}"
        )));
    }
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [
            (c[j][1] - c[k][1]) / (2.0 * area),
            (c[k][0] - c[j][0]) / (2.0 * area),
        ];
    }
    Ok((area, g))
}

fn point(c: &[[f64; 2]; 3], l: &[f64; 3]) -> [f64; 2] {
    [
        l[0] * c[0][0] + l[1] * c[1][0] + l[2] * c[2][0],
        l[0] * c[0][1] + l[1] * c[1][1] + l[2] * c[2][1],
    ]
}

/// Visits composite 16-point Gauss nodes in x2 over a triangle, pieces no longer
/// than `step`, passing (x2, chord start, chord end, weight). Integrands whose x1
/// dependence is polynomial can then be integrated exactly along each chord.
pub fn x2_slices(c: &[[f64; 2]; 3], step: f64, mut f: impl FnMut(f64, f64, f64, f64)) {
    static GL: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    let gl = GL.get_or_init(|| quadrature::gauss_legendre(16));
    let mut v = *c;
    v.sort_by(|a, b| a[1].total_cmp(&b[1]));
    let [p0, p1, p2] = v;
    let on = |a: [f64; 2], b: [f64; 2], y: f64| a[0] + (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]);
    for (lo, hi, e) in [(p0, p1, (p0, p1)), (p1, p2, (p1, p2))] {
        let (a, b) = (lo[1], hi[1]);
        if b <= a {
            continue;
        }
        let n = ((b - a) / step).ceil().clamp(1.0, 256.0) as usize;
        let h = (b - a) / n as f64;
        for k in 0..n {
            for &(t, wt) in gl {
                let y = a + h * (k as f64 + t);
                let (x1, x2) = (on(e.0, e.1, y), on(p0, p2, y));
                f(y, x1.min(x2), x1.max(x2), wt * h);
            }
        }
    }
}

/// ∫_T f(x2), exact up to rounding for smooth f (see [`x2_slices`]).
pub fn x2_integral(c: &[[f64; 2]; 3], f: impl Fn(f64) -> C64, step: f64) -> C64 {
    let mut sum = C64::new(0.0, 0.0);
    x2_slices(c, step, |y, xl, xr, w| sum += w * (xr - xl) * f(y));
    sum
}

/// Length scale of the complex poles of 1/s, which limits the Gauss piece size.
pub fn pole_scale(medium: &Medium) -> f64 {
    let p = &medium.pml;
    let d = |delta: f64, sigma: C64| {
        if sigma.norm() > 0.0 {
            delta * sigma.norm().powf(-1.0 / p.t)
        } else {
            f64::INFINITY
        }
    };
    d(p.delta1, p.sigma1).min(d(p.delta2, p.sigma2))
}

/// ∫_T s and ∫_T 1/s (exact up to rounding) and ∫_T s φ_i φ_j with the given rule.
fn weighted_integrals(
    c: &[[f64; 2]; 3],
    area: f64,
    medium: &Medium,
    rule: &[TriPoint],
) -> (C64, C64, [[C64; 3]; 3]) {
    let mut m = [[C64::new(0.0, 0.0); 3]; 3];
    let mut physical = true;
    for (l, w) in rule {
        let s = medium.s(point(c, l)[1]);
        physical &= s == C64::new(1.0, 0.0);
        let wa = w * area;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += wa * s * l[i] * l[j];
            }
        }
    }
    if physical && c.iter().all(|v| medium.s(v[1]) == C64::new(1.0, 0.0)) {
        return (C64::from(area), C64::from(area), m);
    }
    let step = pole_scale(medium);
    let s0 = x2_integral(c, |y| medium.s(y), step);
    let s1 = x2_integral(c, |y| 1.0 / medium.s(y), step);
    (s0, s1, m)
}

/// ∫_T s ∂1p ∂1φ + s⁻¹ ∂2p ∂2φ − κ² s p φ on the P1 basis; entry [i][j] pairs test i with trial j.
pub fn fluid_element_matrix(
    c: &[[f64; 2]; 3],
    kappa: f64,
    medium: &Medium,
) -> Result<[[C64; 3]; 3], AssemblyError> {
    fluid_element_matrix_with(c, kappa, medium, &quadrature::triangle_deg5())
}

pub fn fluid_element_matrix_with(
    c: &[[f64; 2]; 3],
    kappa: f64,
    medium: &Medium,
    rule: &[TriPoint],
) -> Result<[[C64; 3]; 3], AssemblyError> {
    let (area, g) = p1_gradients(c)?;
    let (s0, s1, m) = weighted_integrals(c, area, medium, rule);
    let mut k = [[C64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = s0 * g[i][0] * g[j][0] + s1 * g[i][1] * g[j][1] - kappa * kappa * m[i][j];
        }
    }
    Ok(k)
}

/// S_{λ,μ} minus ω²ρ s mass on vector P1; local index 2·node + component.
pub fn solid_element_matrix(
    c: &[[f64; 2]; 3],
    cfg: &ProblemConfig,
    medium: &Medium,
) -> Result<[[C64; 6]; 6], AssemblyError> {
    solid_element_matrix_with(c, cfg, medium, &quadrature::triangle_deg5())
}

pub fn solid_element_matrix_with(
    c: &[[f64; 2]; 3],
    cfg: &ProblemConfig,
    medium: &Medium,
    rule: &[TriPoint],
) -> Result<[[C64; 6]; 6], AssemblyError> {
    let (area, g) = p1_gradients(c)?;
    let (s0, s1, m) = weighted_integrals(c, area, medium, rule);
    let (la, mu) = (cfg.lambda, cfg.mu);
    let lm = 2.0 * mu + la;
    let w = cfg.omega * cfg.omega * cfg.rho;
    let mut k = [[C64::new(0.0, 0.0); 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            let (gi, gj) = (g[i], g[j]);
            k[2 * i][2 * j] = lm * s0 * gj[0] * gi[0] + mu * s1 * gj[1] * gi[1] - w * m[i][j];
            k[2 * i + 1][2 * j + 1] =
                lm * s1 * gj[1] * gi[1] + mu * s0 * gj[0] * gi[0] - w * m[i][j];
            // test ψ1, trial u2: λ ∂2u2 ∂1ψ1 + μ ∂1u2 ∂2ψ1
            k[2 * i][2 * j + 1] = C64::from(area * (la * gj[1] * gi[0] + mu * gj[0] * gi[1]));
            // test ψ2, trial u1: λ ∂1u1 ∂2ψ2 + μ ∂2u1 ∂1ψ2
            k[2 * i + 1][2 * j] = C64::from(area * (la * gj[0] * gi[1] + mu * gj[1] * gi[0]));
        }
    }
    Ok(k)
}

/// Local coupling blocks on one interface edge (a, b) with unit normal n into the fluid.
///
/// `p_to_psi[i][j][c]` = ∫_e φ_j n_c φ_i (pressure trial j, displacement test (i, c));
/// `u_to_phi[i][j][c]` = ∫_e ρf ω² φ_j n_c φ_i (displacement trial (j, c), pressure test i).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingBlocks {
    pub p_to_psi: [[[f64; 2]; 2]; 2],
    pub u_to_phi: [[[f64; 2]; 2]; 2],
}

pub fn interface_coupling(
    a: [f64; 2],
    b: [f64; 2],
    n: [f64; 2],
    cfg: &ProblemConfig,
) -> CouplingBlocks {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let mut mass = [[0.0; 2]; 2];
    for (t, w) in quadrature::gauss_legendre(2) {
        let phi = [1.0 - t, t];
        for i in 0..2 {
            for j in 0..2 {
                mass[i][j] += w * len * phi[i] * phi[j];
            }
        }
    }
    let rf = cfg.rho_f * cfg.omega * cfg.omega;
    let mut out = CouplingBlocks {
        p_to_psi: [[[0.0; 2]; 2]; 2],
        u_to_phi: [[[0.0; 2]; 2]; 2],
    };
    for i in 0..2 {
        for j in 0..2 {
            for c in 0..2 {
                out.p_to_psi[i][j][c] = mass[i][j] * n[c];
                out.u_to_phi[i][j][c] = rf * mass[i][j] * n[c];
            }
        }
    }
    out
}

/// Unit normal of an interface edge pointing into the fluid element.
pub fn interface_normal(mesh: &Mesh, edge: usize) -> Result<[f64; 2], AssemblyError> {
    let e = &mesh.edges[edge];
    let Some(other) = e.elements.1 else {
        return Err(AssemblyError::Orientation { edge });
    };
    let (fl, so) = if mesh.elements[e.elements.0].region.is_fluid() {
        (e.elements.0, other)
    } else {
        (other, e.elements.0)
    };
    if !mesh.elements[fl].region.is_fluid() || mesh.elements[so].region.is_fluid() {
        return Err(AssemblyError::Orientation { edge });
    }
    let [a, b] = e.nodes.map(|n| mesh.nodes[n].x);
    let t = [(b[0] - a[0]) / e.length, (b[1] - a[1]) / e.length];
    let n0 = [-t[1], t[0]];
    let side = |el: usize| {
        let c = mesh.centroid(el);
        n0[0] * (c[0] - a[0]) + n0[1] * (c[1] - a[1])
    };
    let (mut sf, mut ss) = (side(fl), side(so));
    let mut n = n0;
    if sf < 0.0 {
        n = [-n0[0], -n0[1]];
        (sf, ss) = (-sf, -ss);
    }
    if !(sf > 0.0 && ss < 0.0) {
        return Err(AssemblyError::Orientation { edge });
    }
    Ok(n)
}

/// Interface-edge load: fluid entries ∫ ∂_n p^in φ_i and solid entries −∫ p^in n_c φ_i.
pub fn edge_load(
    a: [f64; 2],
    b: [f64; 2],
    n: [f64; 2],
    wave: &PlaneWave,
    points: usize,
) -> ([C64; 2], [[C64; 2]; 2]) {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let mut fl = [C64::new(0.0, 0.0); 2];
    let mut so = [[C64::new(0.0, 0.0); 2]; 2];
    for (t, w) in quadrature::gauss_legendre(points) {
        let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        let g = wave.grad(x);
        let dn = g[0] * n[0] + g[1] * n[1];
        let p = wave.value(x);
        let phi = [1.0 - t, t];
        for i in 0..2 {
            fl[i] += w * len * dn * phi[i];
            for c in 0..2 {
                so[i][c] -= w * len * p * n[c] * phi[i];
            }
        }
    }
    (fl, so)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DofKind {
    Free(usize),
    Dirichlet,
    Slave { master: usize, factor: C64 },
}

/// Numbering of the full (unconstrained) dofs and their classification.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub fluid: Vec<Option<usize>>,
    pub solid: Vec<Option<[usize; 2]>>,
    pub kinds: Vec<DofKind>,
    pub n_free: usize,
    pub multiplier: C64,
}

impl DofMap {
    pub fn new(mesh: &Mesh, multiplier: C64) -> Self {
        let n = mesh.nodes.len();
        let (mut in_fluid, mut in_solid) = (vec![false; n], vec![false; n]);
        for el in &mesh.elements {
            let target = if el.region.is_fluid() {
                &mut in_fluid
            } else {
                &mut in_solid
            };
            for &v in &el.nodes {
                target[v] = true;
            }
        }
        let mut fluid = vec![None; n];
        let mut solid = vec![None; n];
        let mut count = 0;
        for i in 0..n {
            if in_fluid[i] {
                fluid[i] = Some(count);
                count += 1;
            }
            if in_solid[i] {
                solid[i] = Some([count, count + 1]);
                count += 2;
            }
        }
        let mut kinds = vec![DofKind::Dirichlet; count];
        // Pass 1: masters and Dirichlet; pass 2: slaves refer to already classified masters.
        let mut n_free = 0;
        for i in 0..n {
            let node = &mesh.nodes[i];
            if node.on_right {
                continue;
            }
            if let Some(d) = fluid[i] {
                if !node.on_gamma_plus_pml {
                    kinds[d] = DofKind::Free(n_free);
                    n_free += 1;
                }
            }
            if let Some(ds) = solid[i] {
                for d in ds {
                    if !node.on_gamma_minus_pml {
                        kinds[d] = DofKind::Free(n_free);
                        n_free += 1;
                    }
                }
            }
        }
        for i in 0..n {
            let node = &mesh.nodes[i];
            if !node.on_right {
                continue;
            }
            let partner = node.periodic_partner;
            let link =
                |own: Option<usize>, master: Option<usize>, dirichlet: bool| match (own, master) {
                    (Some(d), Some(m)) if !dirichlet => Some((d, m)),
                    _ => None,
                };
            let mut pairs = Vec::new();
            if let Some(p) = link(
                fluid[i],
                partner.and_then(|p| fluid[p]),
                node.on_gamma_plus_pml,
            ) {
                pairs.push(p);
            }
            if let (Some(ds), Some(ms)) = (solid[i], partner.and_then(|p| solid[p])) {
                if !node.on_gamma_minus_pml {
                    pairs.push((ds[0], ms[0]));
                    pairs.push((ds[1], ms[1]));
                }
            }
            for (d, m) in pairs {
                kinds[d] = match kinds[m] {
                    DofKind::Free(_) => DofKind::Slave {
                        master: m,
                        factor: multiplier,
                    },
                    _ => DofKind::Dirichlet,
                };
            }
        }
        DofMap {
            fluid,
            solid,
            kinds,
            n_free,
            multiplier,
        }
    }

    pub fn n_full(&self) -> usize {
        self.kinds.len()
    }

    /// Free index and coefficient of a full dof used as a test function (conjugated multiplier).
    fn test(&self, d: usize) -> Option<(usize, C64)> {
        match self.kinds[d] {
            DofKind::Free(f) => Some((f, C64::new(1.0, 0.0))),
            DofKind::Slave { master, factor } => match self.kinds[master] {
                DofKind::Free(f) => Some((f, factor.conj())),
                _ => None,
            },
            DofKind::Dirichlet => None,
        }
    }

    /// Free index and coefficient of a full dof used as a trial function.
    fn trial(&self, d: usize) -> Option<(usize, C64)> {
        match self.kinds[d] {
            DofKind::Free(f) => Some((f, C64::new(1.0, 0.0))),
            DofKind::Slave { master, factor } => match self.kinds[master] {
                DofKind::Free(f) => Some((f, factor)),
                _ => None,
            },
            DofKind::Dirichlet => None,
        }
    }

    /// Full dofs of an element's unknowns, in the local order of the element matrix.
    pub fn element_dofs(&self, mesh: &Mesh, e: usize) -> Vec<usize> {
        let el = &mesh.elements[e];
        if el.region.is_fluid() {
            el.nodes
                .iter()
                .map(|&n| self.fluid[n].expect("fluid node"))
                .collect()
        } else {
            el.nodes
                .iter()
                .flat_map(|&n| self.solid[n].expect("solid node"))
                .collect()
        }
    }
}

/// Values of every full dof; slaves and Dirichlet dofs obey their constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub dofs: DofMap,
    pub values: Vec<C64>,
}

impl SystemState {
    pub fn zero(dofs: DofMap) -> Self {
        let n = dofs.n_full();
        SystemState {
            dofs,
            values: vec![C64::new(0.0, 0.0); n],
        }
    }

    /// Expands a free-dof vector: slave = factor × master, Dirichlet = 0.
    pub fn from_free(dofs: DofMap, x: &[C64]) -> Self {
        assert_eq!(x.len(), dofs.n_free);
        let values = dofs
            .kinds
            .iter()
            .map(|k| match *k {
                DofKind::Free(f) => x[f],
                DofKind::Dirichlet => C64::new(0.0, 0.0),
                DofKind::Slave { master, factor } => match dofs.kinds[master] {
                    DofKind::Free(f) => factor * x[f],
                    _ => C64::new(0.0, 0.0),
                },
            })
            .collect();
        SystemState { dofs, values }
    }

    /// Nodal interpolant projected onto the constrained space.
    pub fn interpolate(
        mesh: &Mesh,
        dofs: DofMap,
        p: impl Fn([f64; 2]) -> C64,
        u: impl Fn([f64; 2]) -> [C64; 2],
    ) -> Self {
        let mut full = vec![C64::new(0.0, 0.0); dofs.n_full()];
        for (i, node) in mesh.nodes.iter().enumerate() {
            if let Some(d) = dofs.fluid[i] {
                full[d] = p(node.x);
            }
            if let Some(ds) = dofs.solid[i] {
                let v = u(node.x);
                full[ds[0]] = v[0];
                full[ds[1]] = v[1];
            }
        }
        let free = free_part(&dofs, &full);
        SystemState::from_free(dofs, &free)
    }

    pub fn free_vector(&self) -> Vec<C64> {
        free_part(&self.dofs, &self.values)
    }

    pub fn p(&self, node: usize) -> C64 {
        self.dofs.fluid[node].map_or(C64::new(0.0, 0.0), |d| self.values[d])
    }

    pub fn u(&self, node: usize) -> [C64; 2] {
        self.dofs.solid[node].map_or([C64::new(0.0, 0.0); 2], |d| {
            [self.values[d[0]], self.values[d[1]]]
        })
    }
}

fn free_part(dofs: &DofMap, full: &[C64]) -> Vec<C64> {
    let mut x = vec![C64::new(0.0, 0.0); dofs.n_free];
    for (d, k) in dofs.kinds.iter().enumerate() {
        if let DofKind::Free(f) = k {
            x[*f] = full[d];
        }
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<C64>,
    pub dofs: DofMap,
}

/// Full-dof load vector from the incident wave on the interface.
pub fn load_vector(
    mesh: &Mesh,
    dofs: &DofMap,
    wave: &PlaneWave,
) -> Result<Vec<C64>, AssemblyError> {
    let mut b = vec![C64::new(0.0, 0.0); dofs.n_full()];
    for (k, e) in mesh.edges.iter().enumerate() {
        if e.tag != EdgeTag::Interface {
            continue;
        }
        let n = interface_normal(mesh, k)?;
        let [a, bb] = e.nodes.map(|v| mesh.nodes[v].x);
        let (fl, so) = edge_load(a, bb, n, wave, 4);
        for i in 0..2 {
            let v = e.nodes[i];
            b[dofs.fluid[v].expect("interface node has a pressure dof")] += fl[i];
            let ds = dofs.solid[v].expect("interface node has displacement dofs");
            b[ds[0]] += so[i][0];
            b[ds[1]] += so[i][1];
        }
    }
    Ok(b)
}

/// Assembles the full (unconstrained) matrix as triplets over full dofs.
pub fn full_triplets(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    medium: &Medium,
    dofs: &DofMap,
) -> Result<Vec<(usize, usize, C64)>, AssemblyError> {
    let mut t = Vec::with_capacity(mesh.elements.len() * 36);
    for e in 0..mesh.elements.len() {
        let c = mesh.coords(e);
        let ld = dofs.element_dofs(mesh, e);
        if mesh.elements[e].region.is_fluid() {
            let k = fluid_element_matrix(&c, cfg.kappa, medium)?;
            for i in 0..3 {
                for j in 0..3 {
                    t.push((ld[i], ld[j], k[i][j]));
                }
            }
        } else {
            let k = solid_element_matrix(&c, cfg, medium)?;
            for i in 0..6 {
                for j in 0..6 {
                    t.push((ld[i], ld[j], k[i][j]));
                }
            }
        }
    }
    for (k, e) in mesh.edges.iter().enumerate() {
        if e.tag != EdgeTag::Interface {
            continue;
        }
        let n = interface_normal(mesh, k)?;
        let [a, b] = e.nodes.map(|v| mesh.nodes[v].x);
        let blk = interface_coupling(a, b, n, cfg);
        let pf = e
            .nodes
            .map(|v| dofs.fluid[v].expect("interface pressure dof"));
        let us = e
            .nodes
            .map(|v| dofs.solid[v].expect("interface displacement dofs"));
        for i in 0..2 {
            for j in 0..2 {
                for c in 0..2 {
                    t.push((us[i][c], pf[j], C64::from(blk.p_to_psi[i][j][c])));
                    t.push((pf[i], us[j][c], C64::from(blk.u_to_phi[i][j][c])));
                }
            }
        }
    }
    Ok(t)
}

pub fn assemble(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    pml: &PmlConfig,
) -> Result<LinearSystem, AssemblyError> {
    let d = config::derive(cfg);
    let dofs = DofMap::new(mesh, (I * d.alpha * cfg.period).exp());
    assemble_with(mesh, cfg, pml, dofs, &PlaneWave::incident(cfg))
}

pub fn assemble_with(
    mesh: &Mesh,
    cfg: &ProblemConfig,
    pml: &PmlConfig,
    dofs: DofMap,
    wave: &PlaneWave,
) -> Result<LinearSystem, AssemblyError> {
    let medium = pml.medium(cfg);
    let full = full_triplets(mesh, cfg, &medium, &dofs)?;
    let mut t = Vec::with_capacity(full.len());
    for (r, c, v) in full {
        if let (Some((fr, a)), Some((fc, b))) = (dofs.test(r), dofs.trial(c)) {
            t.push((fr, fc, a * b * v));
        }
    }
    let matrix = CsrMatrix::from_triplets(dofs.n_free, dofs.n_free, t);
    let mut rhs = vec![C64::new(0.0, 0.0); dofs.n_free];
    for (d, v) in load_vector(mesh, &dofs, wave)?.into_iter().enumerate() {
        if let Some((f, a)) = dofs.test(d) {
            rhs[f] += a * v;
        }
    }
    Ok(LinearSystem { matrix, rhs, dofs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_initial_mesh;

    fn cfg() -> ProblemConfig {
        ProblemConfig::flat_example()
    }

    fn pml() -> PmlConfig {
        PmlConfig::uniform(1.0, C64::new(4.0, 6.0), 2.0)
    }

    const TRI: [[f64; 2]; 3] = [[0.1, 0.2], [0.5, 0.25], [0.2, 0.6]];

    #[test]
    fn stretch_values() {
        let (c, p) = (cfg(), pml());
        assert_eq!(stretch(0.0, &c, &p), C64::new(1.0, 0.0));
        assert_eq!(stretch(c.h1, &c, &p), C64::new(1.0, 0.0));
        assert!((stretch(c.h1 + 1.0, &c, &p) - (1.0 + p.sigma1)).norm() < 1e-15);
    }

    /// Closed-form P1 Helmholtz element: K = A·GGᵀ, M = A/12·(1 + δij).
    #[test]
    fn physical_fluid_element_matches_closed_form() {
        let med = pml().medium(&cfg());
        let k = fluid_element_matrix(&TRI, 1.7, &med).unwrap();
        let c = TRI;
        let area = 0.5
            * ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1])
                - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]));
        // Edge vectors opposite each vertex give the gradients: ∇λ_i = rot(e_i)/(2A).
        let e = |i: usize| {
            let (a, b) = (c[(i + 1) % 3], c[(i + 2) % 3]);
            [b[0] - a[0], b[1] - a[1]]
        };
        for i in 0..3 {
            for j in 0..3 {
                let (ei, ej) = (e(i), e(j));
                let stiff = (ei[0] * ej[0] + ei[1] * ej[1]) / (4.0 * area);
                let mass = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                let expect = stiff - 1.7 * 1.7 * mass;
                assert!((k[i][j] - expect).norm() < 1e-12, "{i}{j}");
            }
        }
    }

    #[test]
    fn zero_wavenumber_rows_sum_to_zero() {
        let med = pml().medium(&cfg());
        for c in [TRI, [[0.0, 1.2], [0.3, 1.3], [0.1, 1.7]]] {
            let k = fluid_element_matrix(&c, 0.0, &med).unwrap();
            for row in k {
                assert!(row.iter().sum::<C64>().norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pml_element_is_complex() {
        let med = pml().medium(&cfg());
        let c = [[0.0, 1.2], [0.3, 1.3], [0.1, 1.7]];
        let k = fluid_element_matrix(&c, 1.0, &med).unwrap();
        assert!(k.iter().flatten().all(|v| v.im != 0.0));
    }

    /// Independent elasticity oracle: K = A·BᵀDB (Voigt, engineering shear), consistent mass.
    #[test]
    fn physical_solid_element_matches_voigt_assembly() {
        let c = cfg();
        let c = ProblemConfig {
            lambda: 1.3,
            mu: 0.7,
            ..c
        };
        let med = pml().medium(&c);
        let k = solid_element_matrix(&TRI, &c, &med).unwrap();
        let t = TRI;
        let area = crate::mesh::signed_area(&t);
        let b = [t[1][1] - t[2][1], t[2][1] - t[0][1], t[0][1] - t[1][1]];
        let cc = [t[2][0] - t[1][0], t[0][0] - t[2][0], t[1][0] - t[0][0]];
        let mut bm = [[0.0; 6]; 3];
        for i in 0..3 {
            bm[0][2 * i] = b[i] / (2.0 * area);
            bm[1][2 * i + 1] = cc[i] / (2.0 * area);
            bm[2][2 * i] = cc[i] / (2.0 * area);
            bm[2][2 * i + 1] = b[i] / (2.0 * area);
        }
        let (l, m) = (c.lambda, c.mu);
        let d = [[l + 2.0 * m, l, 0.0], [l, l + 2.0 * m, 0.0], [0.0, 0.0, m]];
        let w = c.omega * c.omega * c.rho;
        for i in 0..6 {
            for j in 0..6 {
                let mut s = 0.0;
                for p in 0..3 {
                    for q in 0..3 {
                        s += bm[p][i] * d[p][q] * bm[q][j];
                    }
                }
                let mass = if i % 2 == j % 2 {
                    area / 12.0 * if i / 2 == j / 2 { 2.0 } else { 1.0 }
                } else {
                    0.0
                };
                let expect = area * s - w * mass;
                assert!(
                    (k[i][j] - expect).norm() < 1e-12,
                    "{i}{j}: {} vs {expect}",
                    k[i][j]
                );
            }
        }
    }

    #[test]
    fn rigid_translation_in_kernel() {
        let c = ProblemConfig {
            omega: 0.0,
            ..cfg()
        };
        let med = pml().medium(&c);
        let k = solid_element_matrix(&TRI, &c, &med).unwrap();
        for u in [[1.0, 0.0], [0.0, 1.0]] {
            for row in &k {
                let r: C64 = (0..3)
                    .map(|j| row[2 * j] * u[0] + row[2 * j + 1] * u[1])
                    .sum();
                assert!(r.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn physical_solid_element_is_complex_symmetric() {
        let med = pml().medium(&cfg());
        let k = solid_element_matrix(&TRI, &cfg(), &med).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert!((k[i][j] - k[j][i]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn quadrature_invariance_in_layers() {
        let c = cfg();
        for sigma in [
            C64::new(60.0, 80.0),
            C64::new(0.0, 100.0),
            C64::new(100.0, 1.0),
        ] {
            for (delta, h) in [(1.0, 0.25), (2.0, 0.05)] {
                let p = PmlConfig::uniform(delta, sigma, 2.0);
                let med = p.medium(&c);
                let m = generate_initial_mesh(&c, &p, h).unwrap();
                let hi = quadrature::triangle_collapsed(5);
                let lo = quadrature::triangle_deg5();
                for e in (0..m.elements.len()).filter(|&e| m.elements[e].region.is_pml()) {
                    let x = m.coords(e);
                    if m.elements[e].region.is_fluid() {
                        let a = fluid_element_matrix_with(&x, c.kappa, &med, &lo).unwrap();
                        let b = fluid_element_matrix_with(&x, c.kappa, &med, &hi).unwrap();
                        let scale = b.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
                        let diff = a
                            .iter()
                            .flatten()
                            .zip(b.iter().flatten())
                            .map(|(x, y)| (x - y).norm())
                            .fold(0.0, f64::max);
                        assert!(diff < 1e-8 * scale, "element {e}: {diff:e} vs {scale:e}");
                    } else {
                        let a = solid_element_matrix_with(&x, &c, &med, &lo).unwrap();
                        let b = solid_element_matrix_with(&x, &c, &med, &hi).unwrap();
                        let scale = b.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
                        let diff = a
                            .iter()
                            .flatten()
                            .zip(b.iter().flatten())
                            .map(|(x, y)| (x - y).norm())
                            .fold(0.0, f64::max);
                        assert!(diff < 1e-8 * scale, "element {e}: {diff:e} vs {scale:e}");
                    }
                }
            }
        }
    }

    #[test]
    fn x2_reduction_integrates_polynomials() {
        let c = [[0.1, 0.2], [0.7, 0.5], [0.3, 0.9]];
        let area = crate::mesh::signed_area(&c);
        let one = x2_integral(&c, |_| C64::new(1.0, 0.0), 0.1);
        assert!((one.re - area).abs() < 1e-15);
        // ∫ y² against the degree-5 rule
        let q: f64 = quadrature::triangle_deg5()
            .iter()
            .map(|(l, w)| w * area * point(&c, l)[1].powi(2))
            .sum();
        assert!((x2_integral(&c, |y| C64::from(y * y), 1.0).re - q).abs() < 1e-15);
    }

    #[test]
    fn horizontal_interface_coupling() {
        let c = cfg();
        let blk = interface_coupling([0.0, 0.0], [0.5, 0.0], [0.0, 1.0], &c);
        let mass = [[0.5 / 3.0, 0.5 / 6.0], [0.5 / 6.0, 0.5 / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(blk.p_to_psi[i][j][0], 0.0);
                assert!((blk.p_to_psi[i][j][1] - mass[i][j]).abs() < 1e-15);
            }
        }
        let c0 = ProblemConfig { rho_f: 0.0, ..c };
        let blk = interface_coupling([0.0, 0.0], [0.5, 0.0], [0.0, 1.0], &c0);
        assert!(blk.u_to_phi.iter().flatten().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn reversed_edge_gives_same_blocks() {
        let c = cfg();
        let (a, b, n) = (
            [0.1, 0.2],
            [0.4, 0.35],
            [-0.447213595499958, 0.894427190999916],
        );
        let f = interface_coupling(a, b, n, &c);
        let r = interface_coupling(b, a, n, &c);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert!((f.p_to_psi[i][j][k] - r.p_to_psi[1 - i][1 - j][k]).abs() < 1e-15);
                    assert!((f.u_to_phi[i][j][k] - r.u_to_phi[1 - i][1 - j][k]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn constant_incident_field_load() {
        let wave = PlaneWave {
            alpha: 0.0,
            beta: 0.0,
            amplitude: 1.0,
        };
        let (fl, so) = edge_load([0.0, 0.0], [0.3, 0.4], [-0.8, 0.6], &wave, 4);
        assert!(fl.iter().all(|v| v.norm() < 1e-16));
        // −∫ n_c φ_i = −n_c·L/2
        for i in 0..2 {
            assert!((so[i][0] - C64::from(0.8 * 0.25)).norm() < 1e-15);
            assert!((so[i][1] - C64::from(-0.6 * 0.25)).norm() < 1e-15);
        }
    }

    #[test]
    fn flat_load_bounded_by_edge_length() {
        let c = cfg();
        let wave = PlaneWave::incident(&c);
        let (_, so) = edge_load([0.2, 0.0], [0.45, 0.0], [0.0, 1.0], &wave, 4);
        let total: f64 = so.iter().map(|s| s[1].norm()).sum();
        assert!(total <= 0.25 + 1e-14);
    }

    #[test]
    fn load_quadrature_refinement() {
        let c = cfg();
        let m = generate_initial_mesh(
            &ProblemConfig {
                kappa: 4.0,
                ..c.clone()
            },
            &pml(),
            0.1,
        )
        .unwrap();
        let wave = PlaneWave {
            alpha: 2.0,
            beta: 3.4641016151377544,
            amplitude: 1.0,
        };
        for (k, e) in m
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.tag == EdgeTag::Interface)
        {
            let n = interface_normal(&m, k).unwrap();
            let [a, b] = e.nodes.map(|v| m.nodes[v].x);
            let (f4, s4) = edge_load(a, b, n, &wave, 4);
            let (f8, s8) = edge_load(a, b, n, &wave, 8);
            let scale = f8
                .iter()
                .chain(s8.iter().flatten())
                .map(|v| v.norm())
                .fold(0.0, f64::max);
            let diff = f4
                .iter()
                .zip(&f8)
                .chain(s4.iter().flatten().zip(s8.iter().flatten()))
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-10 * scale);
        }
    }

    #[test]
    fn system_dimensions_and_pattern() {
        let c = ProblemConfig {
            profile: vec![[0.0, 0.0], [0.5, 0.4], [1.0, 0.0]],
            ..cfg()
        };
        let m = generate_initial_mesh(&c, &pml(), 0.2).unwrap();
        let sys = assemble(&m, &c, &pml()).unwrap();
        assert_eq!(sys.matrix.n_rows, sys.dofs.n_free);
        assert_eq!(sys.matrix.n_cols, sys.dofs.n_free);
        assert_eq!(sys.rhs.len(), sys.dofs.n_free);
        assert!(sys.matrix.has_symmetric_pattern());
        // Interface nodes carry three dofs.
        for (i, n) in m.nodes.iter().enumerate() {
            if n.on_interface {
                assert!(sys.dofs.fluid[i].is_some() && sys.dofs.solid[i].is_some());
            }
        }
        for (i, n) in m.nodes.iter().enumerate() {
            if n.on_gamma_plus_pml {
                assert_eq!(
                    sys.dofs.kinds[sys.dofs.fluid[i].unwrap()],
                    DofKind::Dirichlet
                );
            }
            if n.on_right && !n.on_gamma_plus_pml && !n.on_gamma_minus_pml {
                if let Some(d) = sys.dofs.fluid[i] {
                    assert!(matches!(sys.dofs.kinds[d], DofKind::Slave { .. }));
                }
            }
        }
    }

    #[test]
    fn normal_incidence_elimination_path() {
        let c = ProblemConfig {
            theta: 0.0,
            ..cfg()
        };
        let m = generate_initial_mesh(&c, &pml(), 0.25).unwrap();
        let a = assemble(&m, &c, &pml()).unwrap();
        let b = assemble_with(
            &m,
            &c,
            &pml(),
            DofMap::new(&m, C64::new(1.0, 0.0)),
            &PlaneWave::incident(&c),
        )
        .unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.rhs, b.rhs);
    }

    #[test]
    fn normal_orientation_points_into_fluid() {
        let c = ProblemConfig {
            profile: vec![[0.0, 0.0], [0.5, 0.4], [1.0, 0.0]],
            ..cfg()
        };
        let m = generate_initial_mesh(&c, &pml(), 0.25).unwrap();
        for (k, e) in m
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.tag == EdgeTag::Interface)
        {
            let n = interface_normal(&m, k).unwrap();
            assert!(n[1] > 0.0);
            let [a, b] = e.nodes.map(|v| m.nodes[v].x);
            assert!((n[0] * (b[0] - a[0]) + n[1] * (b[1] - a[1])).abs() < 1e-14);
        }
    }
}
