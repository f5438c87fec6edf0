//! Residual a posteriori indicators for the discrete PML solution: element
//! residuals, flux/traction jumps (interior, interface, periodic), the split
//! εF/εP, and the energy-norm error against an analytic solution.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::assembly::{p1_gradients, PlaneWave, SystemState};
use crate::config::{self, Medium, PmlConfig, ProblemConfig};
use crate::mesh::{EdgeTag, Mesh};
use crate::quadrature;
use crate::spectral::{self, FlatInterfaceSolution};

const EDGE_POINTS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("periodic edge {0} has no partner")]
    MissingPartner(usize),
    #[error("interface edge {0} does not separate fluid from solid")]
    BadInterface(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Fluid,
    Solid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorField {
    pub eta: Vec<f64>,
    pub side: Vec<Side>,
    pub eps_f: f64,
    pub eps_p: f64,
}

/// L²(e) norm of one jump, charged to one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpNorm {
    pub edge: usize,
    pub element: usize,
    pub norm: f64,
}

type Grad = [C64; 2];

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Constant P1 gradient of the pressure on a fluid element.
pub fn pressure_gradient(mesh: &Mesh, e: usize, state: &SystemState) -> Grad {
    let (_, g) = p1_gradients(&mesh.coords(e)).expect("valid element");
    let n = mesh.elements[e].nodes;
    let mut out = [zero(); 2];
    for k in 0..3 {
        let p = state.p(n[k]);
        out[0] += p * g[k][0];
        out[1] += p * g[k][1];
    }
    out
}

/// Constant P1 displacement gradient, g[i][j] = ∂_j u_i.
pub fn displacement_gradient(mesh: &Mesh, e: usize, state: &SystemState) -> [Grad; 2] {
    let (_, g) = p1_gradients(&mesh.coords(e)).expect("valid element");
    let n = mesh.elements[e].nodes;
    let mut out = [[zero(); 2]; 2];
    for k in 0..3 {
        let u = state.u(n[k]);
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] += u[i] * g[k][j];
            }
        }
    }
    out
}

/// Anisotropic fluid flux diag(s, 1/s)·∇p.
fn fluid_flux(g: Grad, s: C64) -> Grad {
    [s * g[0], g[1] / s]
}

/// Conormal derivative of the stretched elastic form; σ(u)ν where s = 1.
pub fn solid_conormal(g: [Grad; 2], s: C64, nu: [f64; 2], cfg: &ProblemConfig) -> Grad {
    let (la, mu) = (cfg.lambda, cfg.mu);
    let lm = 2.0 * mu + la;
    [
        lm * s * g[0][0] * nu[0]
            + mu / s * g[0][1] * nu[1]
            + la * g[1][1] * nu[0]
            + mu * g[1][0] * nu[1],
        lm / s * g[1][1] * nu[1]
            + mu * s * g[1][0] * nu[0]
            + la * g[0][0] * nu[1]
            + mu * g[0][1] * nu[0],
    ]
}

fn interp(c: &[[f64; 2]; 3], l: &[f64; 3]) -> [f64; 2] {
    [
        l[0] * c[0][0] + l[1] * c[1][0] + l[2] * c[2][0],
        l[0] * c[0][1] + l[1] * c[1][1] + l[2] * c[2][1],
    ]
}

/// ∫ |a + b·x1|² over [xl, xr].
fn chord_l2(a: C64, b: C64, xl: f64, xr: f64) -> f64 {
    a.norm_sqr() * (xr - xl)
        + (a * b.conj()).re * (xr * xr - xl * xl)
        + b.norm_sqr() * (xr.powi(3) - xl.powi(3)) / 3.0
}

/// ‖L p_h‖ on a fluid element or ‖L u_h‖ on a solid element.
///
/// For P1 fields and s = s(x2) only the ∂2(1/s)-terms of the divergence survive.
/// Physical elements use the degree-5 rule (exact there); layer elements are
/// sliced along x2 so that the rational weights are integrated to rounding.
pub fn element_residual(
    mesh: &Mesh,
    e: usize,
    state: &SystemState,
    cfg: &ProblemConfig,
    medium: &Medium,
) -> f64 {
    let c = mesh.coords(e);
    let nodes = mesh.elements[e].nodes;
    // Each residual component is A(x2)·∂2v + B(x2)·v with v linear: v = v0 + ∂1v·x1 + ∂2v·(x2 − y0).
    let mut parts: Vec<(C64, C64, C64, C64, C64)> = Vec::new();
    let (y0, x0) = (c[0][1], c[0][0]);
    if mesh.elements[e].region.is_fluid() {
        let g = pressure_gradient(mesh, e, state);
        parts.push((
            state.p(nodes[0]),
            g[0],
            g[1],
            C64::from(1.0),
            C64::from(cfg.kappa * cfg.kappa),
        ));
    } else {
        let g = displacement_gradient(mesh, e, state);
        let u0 = state.u(nodes[0]);
        let w2 = cfg.omega * cfg.omega * cfg.rho;
        parts.push((u0[0], g[0][0], g[0][1], C64::from(cfg.mu), C64::from(w2)));
        parts.push((
            u0[1],
            g[1][0],
            g[1][1],
            C64::from(2.0 * cfg.mu + cfg.lambda),
            C64::from(w2),
        ));
    }
    let coeffs = |y: f64, part: &(C64, C64, C64, C64, C64)| {
        let (v0, g1, g2, a, b) = *part;
        let (s, ds) = (medium.s(y), medium.ds(y));
        // value at (x1, y) = (v0 − g1·x0 + g2·(y − y0)) + g1·x1
        let k = -ds / (s * s) * a * g2 + b * s * (v0 - g1 * x0 + g2 * (y - y0));
        (k, b * s * g1)
    };
    let mut sum = 0.0;
    if mesh.elements[e].region.is_pml() {
        crate::assembly::x2_slices(&c, crate::assembly::pole_scale(medium), |y, xl, xr, w| {
            for part in &parts {
                let (k, m) = coeffs(y, part);
                sum += w * chord_l2(k, m, xl, xr);
            }
        });
    } else {
        let area = mesh.area(e);
        for (l, w) in quadrature::triangle_deg5() {
            let x = interp(&c, &l);
            for part in &parts {
                let (k, m) = coeffs(x[1], part);
                sum += w * area * (k + m * x[0]).norm_sqr();
            }
        }
    }
    sum.max(0.0).sqrt()
}

fn edge_geometry(mesh: &Mesh, edge: usize) -> ([f64; 2], [f64; 2], f64) {
    let e = &mesh.edges[edge];
    let [a, b] = e.nodes.map(|v| mesh.nodes[v].x);
    (a, b, e.length)
}

/// Unit normal of an edge pointing out of element `el`.
fn outward_normal(mesh: &Mesh, edge: usize, el: usize) -> [f64; 2] {
    let (a, b, len) = edge_geometry(mesh, edge);
    let n = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
    let c = mesh.centroid(el);
    if n[0] * (c[0] - a[0]) + n[1] * (c[1] - a[1]) > 0.0 {
        [-n[0], -n[1]]
    } else {
        n
    }
}

/// Normal flux of element `el` through an edge at height x2, outward normal ν.
fn normal_flux(
    mesh: &Mesh,
    el: usize,
    state: &SystemState,
    cfg: &ProblemConfig,
    s: C64,
    nu: [f64; 2],
) -> Grad {
    if mesh.elements[el].region.is_fluid() {
        let f = fluid_flux(pressure_gradient(mesh, el, state), s);
        [f[0] * nu[0] + f[1] * nu[1], zero()]
    } else {
        solid_conormal(displacement_gradient(mesh, el, state), s, nu, cfg)
    }
}

/// √(∫_e |f|²) with 3-point Gauss; f receives the edge parameter t ∈ [0, 1].
fn edge_norm(len: f64, f: impl Fn(f64) -> Grad) -> f64 {
    quadrature::gauss_legendre(EDGE_POINTS)
        .into_iter()
        .map(|(t, w)| {
            let v = f(t);
            w * len * (v[0].norm_sqr() + v[1].norm_sqr())
        })
        .sum::<f64>()
        .sqrt()
}

pub fn edge_jumps(
    mesh: &Mesh,
    state: &SystemState,
    cfg: &ProblemConfig,
    pml: &PmlConfig,
    wave: &PlaneWave,
) -> Result<Vec<JumpNorm>, EstimatorError> {
    let medium = pml.medium(cfg);
    let alpha = config::derive(cfg).alpha;
    let phase = C64::from_polar(1.0, -alpha * cfg.period);
    let mut out = Vec::new();
    for (k, e) in mesh.edges.iter().enumerate() {
        let (a, b, len) = edge_geometry(mesh, k);
        let at = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        match e.tag {
            EdgeTag::DirichletTop | EdgeTag::DirichletBottom => {}
            EdgeTag::Interior | EdgeTag::GammaPlus | EdgeTag::GammaMinus => {
                let (t1, t2) = (
                    e.elements.0,
                    e.elements.1.expect("interior edge has two elements"),
                );
                let (n1, n2) = (outward_normal(mesh, k, t1), outward_normal(mesh, k, t2));
                let norm = edge_norm(len, |t| {
                    let s = medium.s(at(t)[1]);
                    let f1 = normal_flux(mesh, t1, state, cfg, s, n1);
                    let f2 = normal_flux(mesh, t2, state, cfg, s, n2);
                    [-(f1[0] + f2[0]), -(f1[1] + f2[1])]
                });
                out.push(JumpNorm {
                    edge: k,
                    element: t1,
                    norm,
                });
                out.push(JumpNorm {
                    edge: k,
                    element: t2,
                    norm,
                });
            }
            EdgeTag::Interface => {
                let t2 = e.elements.1.ok_or(EstimatorError::BadInterface(k))?;
                let (fl, so) = if mesh.elements[e.elements.0].region.is_fluid() {
                    (e.elements.0, t2)
                } else {
                    (t2, e.elements.0)
                };
                if !mesh.elements[fl].region.is_fluid() || mesh.elements[so].region.is_fluid() {
                    return Err(EstimatorError::BadInterface(k));
                }
                let n = outward_normal(mesh, k, so);
                let gp = pressure_gradient(mesh, fl, state);
                let gu = displacement_gradient(mesh, so, state);
                let [pa, pb] = e.nodes.map(|v| state.p(v));
                let [ua, ub] = e.nodes.map(|v| state.u(v));
                let rf = cfg.rho_f * cfg.omega * cfg.omega;
                let fluid = edge_norm(len, |t| {
                    let x = at(t);
                    let gi = wave.grad(x);
                    let dn = (gi[0] + gp[0]) * n[0] + (gi[1] + gp[1]) * n[1];
                    let un = ((1.0 - t) * ua[0] + t * ub[0]) * n[0]
                        + ((1.0 - t) * ua[1] + t * ub[1]) * n[1];
                    [2.0 * (dn - rf * un), zero()]
                });
                let solid = edge_norm(len, |t| {
                    let x = at(t);
                    let p = wave.value(x) + (1.0 - t) * pa + t * pb;
                    let tr = solid_conormal(gu, C64::new(1.0, 0.0), n, cfg);
                    [-2.0 * (p * n[0] + tr[0]), -2.0 * (p * n[1] + tr[1])]
                });
                out.push(JumpNorm {
                    edge: k,
                    element: fl,
                    norm: fluid,
                });
                out.push(JumpNorm {
                    edge: k,
                    element: so,
                    norm: solid,
                });
            }
            EdgeTag::Left => {
                let pk = e.partner.ok_or(EstimatorError::MissingPartner(k))?;
                let (t1, t2) = (e.elements.0, mesh.edges[pk].elements.0);
                let (n1, n2) = (outward_normal(mesh, k, t1), outward_normal(mesh, pk, t2));
                // Flux depends on position only through s(x2), so matching heights suffices.
                let norm = edge_norm(len, |t| {
                    let s = medium.s(at(t)[1]);
                    let f1 = normal_flux(mesh, t1, state, cfg, s, n1);
                    let f2 = normal_flux(mesh, t2, state, cfg, s, n2);
                    [-(f1[0] + phase * f2[0]), -(f1[1] + phase * f2[1])]
                });
                // The partner's jump is the same function times e^{iαΛ}: equal norm.
                out.push(JumpNorm {
                    edge: k,
                    element: t1,
                    norm,
                });
                out.push(JumpNorm {
                    edge: pk,
                    element: t2,
                    norm,
                });
            }
            EdgeTag::Right => {
                e.partner.ok_or(EstimatorError::MissingPartner(k))?;
            }
        }
    }
    Ok(out)
}

/// L² norms of p_h on Γ+ and of u_h on Γ− (3-point Gauss per edge).
pub fn trace_norms(mesh: &Mesh, state: &SystemState) -> (f64, f64) {
    let (mut top, mut bottom) = (0.0, 0.0);
    for e in &mesh.edges {
        let [a, b] = e.nodes;
        match e.tag {
            EdgeTag::GammaPlus => {
                let (pa, pb) = (state.p(a), state.p(b));
                top += edge_norm(e.length, |t| [(1.0 - t) * pa + t * pb, zero()]).powi(2);
            }
            EdgeTag::GammaMinus => {
                let (ua, ub) = (state.u(a), state.u(b));
                bottom +=
                    edge_norm(e.length, |t| [0, 1].map(|i| (1.0 - t) * ua[i] + t * ub[i])).powi(2);
            }
            _ => {}
        }
    }
    (top.sqrt(), bottom.sqrt())
}

pub fn indicators(
    mesh: &Mesh,
    state: &SystemState,
    cfg: &ProblemConfig,
    pml: &PmlConfig,
) -> Result<IndicatorField, EstimatorError> {
    indicators_with(mesh, state, cfg, pml, &PlaneWave::incident(cfg))
}

/// η_T = h_T‖R‖_T + (½ Σ_{e⊂∂T} h_e‖J_e‖²)^{1/2}.
pub fn indicators_with(
    mesh: &Mesh,
    state: &SystemState,
    cfg: &ProblemConfig,
    pml: &PmlConfig,
    wave: &PlaneWave,
) -> Result<IndicatorField, EstimatorError> {
    let medium = pml.medium(cfg);
    let ne = mesh.elements.len();
    let mut jump_sq = vec![0.0; ne];
    for j in edge_jumps(mesh, state, cfg, pml, wave)? {
        jump_sq[j.element] += 0.5 * mesh.edges[j.edge].length * j.norm * j.norm;
    }
    let eta: Vec<f64> = (0..ne)
        .map(|e| {
            mesh.diameter(e) * element_residual(mesh, e, state, cfg, &medium) + jump_sq[e].sqrt()
        })
        .collect();
    let side = mesh
        .elements
        .iter()
        .map(|el| {
            if el.region.is_fluid() {
                Side::Fluid
            } else {
                Side::Solid
            }
        })
        .collect();
    let eps_f = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (tp, tm) = trace_norms(mesh, state);
    let eps_p = spectral::bound_f1(cfg, pml) * tp + spectral::bound_f2(cfg, pml) * tm;
    Ok(IndicatorField {
        eta,
        side,
        eps_f,
        eps_p,
    })
}

/// Analytic fields on the physical strip (scattered pressure, total displacement).
pub trait ExactSolution {
    fn p(&self, x: [f64; 2]) -> C64;
    fn grad_p(&self, x: [f64; 2]) -> [C64; 2];
    fn u(&self, x: [f64; 2]) -> [C64; 2];
    fn grad_u(&self, x: [f64; 2]) -> [[C64; 2]; 2];
}

impl ExactSolution for FlatInterfaceSolution {
    fn p(&self, x: [f64; 2]) -> C64 {
        self.p_sc(x[0], x[1].into())
    }
    fn grad_p(&self, x: [f64; 2]) -> [C64; 2] {
        self.grad_p_sc(x[0], x[1])
    }
    fn u(&self, x: [f64; 2]) -> [C64; 2] {
        FlatInterfaceSolution::u(self, x[0], x[1].into())
    }
    fn grad_u(&self, x: [f64; 2]) -> [[C64; 2]; 2] {
        FlatInterfaceSolution::grad_u(self, x[0], x[1])
    }
}

/// Energy-norm error ‖U − U_h‖ over the physical elements (degree-5 rule):
/// fluid |∇e|² + |e|², solid λ|div e|² + μ/2·|∇e + ∇eᵀ|² + |e|².
pub fn apriori_error(
    mesh: &Mesh,
    state: &SystemState,
    exact: &dyn ExactSolution,
    cfg: &ProblemConfig,
) -> f64 {
    let rule = quadrature::triangle_deg5();
    let mut sum = 0.0;
    for e in 0..mesh.elements.len() {
        let region = mesh.elements[e].region;
        if region.is_pml() {
            continue;
        }
        let c = mesh.coords(e);
        let area = mesh.area(e);
        let nodes = mesh.elements[e].nodes;
        if region.is_fluid() {
            let g = pressure_gradient(mesh, e, state);
            let pv = nodes.map(|n| state.p(n));
            for (l, w) in &rule {
                let x = interp(&c, l);
                let ph = l[0] * pv[0] + l[1] * pv[1] + l[2] * pv[2];
                let ge = exact.grad_p(x);
                let v = (exact.p(x) - ph).norm_sqr()
                    + (ge[0] - g[0]).norm_sqr()
                    + (ge[1] - g[1]).norm_sqr();
                sum += w * area * v;
            }
        } else {
            let g = displacement_gradient(mesh, e, state);
            let uv = nodes.map(|n| state.u(n));
            for (l, w) in &rule {
                let x = interp(&c, l);
                let uh = [0, 1].map(|i| l[0] * uv[0][i] + l[1] * uv[1][i] + l[2] * uv[2][i]);
                let ue = exact.u(x);
                let ge = exact.grad_u(x);
                let d = [
                    [ge[0][0] - g[0][0], ge[0][1] - g[0][1]],
                    [ge[1][0] - g[1][0], ge[1][1] - g[1][1]],
                ];
                let div = d[0][0] + d[1][1];
                let mut sym = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        sym += (d[i][j] + d[j][i]).norm_sqr();
                    }
                }
                let l2 = (ue[0] - uh[0]).norm_sqr() + (ue[1] - uh[1]).norm_sqr();
                sum += w * area * (cfg.lambda * div.norm_sqr() + 0.5 * cfg.mu * sym + l2);
            }
        }
    }
    sum.sqrt()
}

/// Nodal interpolant of an analytic solution, continued into the layers through
/// the stretched coordinate x̂2.
pub fn interpolate_flat(
    mesh: &Mesh,
    exact: &FlatInterfaceSolution,
    cfg: &ProblemConfig,
    pml: &PmlConfig,
) -> SystemState {
    let medium = pml.medium(cfg);
    let dofs = crate::assembly::DofMap::new(mesh, C64::from_polar(1.0, exact.alpha * cfg.period));
    SystemState::interpolate(
        mesh,
        dofs,
        |x| exact.p_sc(x[0], medium.stretched(x[1])),
        |x| exact.u(x[0], medium.stretched(x[1])),
    )
}
