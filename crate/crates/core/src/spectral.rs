//! Rayleigh-mode arithmetic: DtN symbols, their PML counterparts, truncation bounds
//! and the flat-interface reference solution.

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector2, Vector3, Vector4};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::config::{self, ConfigError, PmlConfig, ProblemConfig, Wavenumber, WOOD_TOL};

const I: C64 = C64::new(0.0, 1.0);

/// Real exponent beyond which coth is replaced by its limit 1.
pub const COTH_CUTOFF: f64 = 40.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Wood(#[from] ConfigError),
    #[error("degenerate mode {n}: {what} vanishes")]
    Degenerate { n: i64, what: &'static str },
    #[error("singular {0} system")]
    Singular(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeData {
    pub n: i64,
    pub alpha_n: f64,
    pub beta: C64,
    pub beta1: C64,
    pub beta2: C64,
    pub theta: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub propagating: bool,
    pub propagating1: bool,
    pub propagating2: bool,
}

impl ModeData {
    /// X_n = α_n² + β_n^(1) β_n^(2).
    pub fn x(&self) -> C64 {
        self.alpha_n * self.alpha_n + self.beta1 * self.beta2
    }
}

fn branch(k: f64, a: f64) -> (C64, f64, bool) {
    let a = a.abs();
    let theta = ((k - a) * (k + a)).abs().sqrt();
    if a < k {
        (C64::new(theta, 0.0), theta, true)
    } else {
        (C64::new(0.0, theta), theta, false)
    }
}

pub fn mode(cfg: &ProblemConfig, n: i64) -> Result<ModeData, SpectralError> {
    let d = config::derive(cfg);
    let a = config::alpha_n(cfg, n);
    for (k, which) in [
        (cfg.kappa, Wavenumber::Fluid),
        (d.kappa1, Wavenumber::Compressional),
        (d.kappa2, Wavenumber::Shear),
    ] {
        if (a.abs() - k).abs() <= WOOD_TOL * k {
            return Err(ConfigError::Wood {
                n,
                alpha_n: a,
                which,
            }
            .into());
        }
    }
    let (beta, theta, propagating) = branch(cfg.kappa, a);
    let (beta1, theta1, propagating1) = branch(d.kappa1, a);
    let (beta2, theta2, propagating2) = branch(d.kappa2, a);
    Ok(ModeData {
        n,
        alpha_n: a,
        beta,
        beta1,
        beta2,
        theta,
        theta1,
        theta2,
        propagating,
        propagating1,
        propagating2,
    })
}

pub fn acoustic_dtn_coeff(m: &ModeData) -> C64 {
    I * m.beta
}

fn checked_x(m: &ModeData) -> Result<C64, SpectralError> {
    let x = m.x();
    let scale = m.alpha_n * m.alpha_n + m.beta1.norm() * m.beta2.norm();
    if x.norm() <= 1e-12 * scale {
        return Err(SpectralError::Degenerate {
            n: m.n,
            what: "X_n",
        });
    }
    Ok(x)
}

/// The exact elastic DtN symbol W_n.
pub fn elastic_dtn_matrix(
    m: &ModeData,
    cfg: &ProblemConfig,
) -> Result<Matrix2<C64>, SpectralError> {
    let x = checked_x(m)?;
    let w2r = cfg.omega * cfg.omega * cfg.rho;
    let a = m.alpha_n;
    let off = 2.0 * cfg.mu * a * x - w2r * a;
    Ok(Matrix2::new(w2r * m.beta1, -off, off, w2r * m.beta2) * (I / x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlEta {
    pub eta1: C64,
    pub eta2: C64,
}

/// Closed-form ∫ s over each layer.
pub fn pml_eta(pml: &PmlConfig) -> PmlEta {
    let layer = |sigma: C64, delta: f64| {
        C64::new(
            (1.0 + sigma.re / (pml.t + 1.0)) * delta,
            sigma.im / (pml.t + 1.0) * delta,
        )
    };
    PmlEta {
        eta1: layer(pml.sigma1, pml.delta1),
        eta2: layer(pml.sigma2, pml.delta2),
    }
}

/// iβ_n coth(−iβ_n η1); the limit iβ_n is returned once the real exponent exceeds the cutoff.
pub fn acoustic_pml_dtn_coeff(m: &ModeData, eta1: C64) -> C64 {
    let y = -I * m.beta * eta1;
    if y.re > COTH_CUTOFF {
        return I * m.beta;
    }
    let z = (-2.0 * y).exp();
    I * m.beta * (1.0 + z) / (1.0 - z)
}

/// Decaying factors z_j = e^{iβ_n^(j) η2}; |z_j| ≤ 1 on the admissible branch.
fn decay_factors(m: &ModeData, eta2: C64) -> (C64, C64) {
    ((I * m.beta1 * eta2).exp(), (I * m.beta2 * eta2).exp())
}

/// Solves the 4×4 mode system for (M1, N1, M2, N2) by LU with partial pivoting.
///
/// The N-columns are rescaled by z_j so that no entry exceeds O(|β|); the
/// unknowns are scaled back afterwards.
pub fn elastic_pml_mode_system(
    m: &ModeData,
    eta2: C64,
    u: Vector2<C64>,
) -> Result<Vector4<C64>, SpectralError> {
    let (z1, z2) = decay_factors(m, eta2);
    let (a, b1, b2) = (C64::from(m.alpha_n), m.beta1, m.beta2);
    #[rustfmt::skip]
    let mat = Matrix4::new(
        a,         a * z1, -b2,      b2 * z2,
        -b1,       b1 * z1, -a,      -a * z2,
        a * z1,    a,      -b2 * z2, b2,
        -b1 * z1,  b1,     -a * z2,  -a,
    );
    let rhs = Vector4::new(-I * u[0], -I * u[1], C64::from(0.0), C64::from(0.0));
    let y = mat
        .lu()
        .solve(&rhs)
        .ok_or(SpectralError::Singular("4x4 mode"))?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::Singular("4x4 mode"));
    }
    let res = (mat * y - rhs).norm();
    if res > 1e-12 * (mat.norm() * y.norm() + rhs.norm()) {
        return Err(SpectralError::Singular("4x4 mode"));
    }
    Ok(Vector4::new(y[0], y[1] * z1, y[2], y[3] * z2))
}

/// Auxiliary quantities of the closed forms, evaluated without overflow.
///
/// ϑ itself can be astronomically large for deep evanescent modes, but it only
/// ever enters multiplied by ς^(1) or by (ς^(1) + 2ξ^(1)); both products have
/// bounded closed forms, which are what is stored here.
struct Aux {
    x: C64,
    xhat: C64,
    vs1: C64,
    xi1: C64,
    xi2: C64,
    vs1_theta: C64,
    vs1_2xi1_theta: C64,
}

fn aux(m: &ModeData, eta2: C64) -> Result<Aux, SpectralError> {
    let x = checked_x(m)?;
    let (z1, z2) = decay_factors(m, eta2);
    let (d1, d2) = (1.0 - z1 * z1, 1.0 - z2 * z2);
    if d1.norm() < 1e-14 || d2.norm() < 1e-14 {
        return Err(SpectralError::Degenerate {
            n: m.n,
            what: "1 - e^{2i beta eta2}",
        });
    }
    let vs1 = 2.0 * z1 * z1 / d1;
    let xi1 = z1 * (z2 - z1) / d1;
    let xi2 = z2 * (z2 - z1) / d2;
    let a2 = m.alpha_n * m.alpha_n;
    let xhat = x + 4.0 * a2 * m.beta1 * m.beta2 * (xi2 - xi1 - xi1 * xi2) / x;
    if xhat.norm() <= 1e-12 * x.norm() {
        return Err(SpectralError::Degenerate {
            n: m.n,
            what: "X̂_n",
        });
    }
    Ok(Aux {
        x,
        xhat,
        vs1,
        xi1,
        xi2,
        vs1_theta: 2.0 * z1 * z2 / d2,
        vs1_2xi1_theta: 2.0 * z2 * z2 / d2,
    })
}

/// The closed-form (M1, N1, M2, N2).
pub fn elastic_pml_closed_form(
    m: &ModeData,
    eta2: C64,
    u: Vector2<C64>,
) -> Result<Vector4<C64>, SpectralError> {
    let Aux {
        x,
        xhat,
        vs1,
        xi1,
        xi2,
        vs1_theta,
        vs1_2xi1_theta,
    } = aux(m, eta2)?;
    let (a, b1, b2) = (C64::from(m.alpha_n), m.beta1, m.beta2);
    let (u1, u2) = (u[0], u[1]);
    let pre = I / (x * xhat);
    // (ς1 + 2ξ1)(ξ2 − ϑ + 1) and ς1(ξ2 − ϑ + 1)
    let p1 = (vs1 + 2.0 * xi1) * (xi2 + 1.0) - vs1_2xi1_theta;
    let p2 = vs1 * (xi2 + 1.0) - vs1_theta;
    let m1 = pre
        * (-x / 2.0 * (vs1 + 2.0) * (a * u1 - b2 * u2) + p1 * (a * b1 * b2 * u1 - a * a * b2 * u2));
    let n1 = pre
        * (x * vs1 / 2.0 * (a * u1 + b2 * u2)
            + (vs1 * xi2 + 2.0 * xi1 * xi2 + 2.0 * xi1) * (a * b1 * b2 * u1 + a * a * b2 * u2));
    let m2 = pre
        * (x / 2.0 * (vs1_theta - 2.0 * (vs1 + 1.0) * (xi2 + 1.0)) * (-b1 * u1 - a * u2)
            + p2 * (-b1 * b1 * b2 * u1 - a * a * a * u2));
    let n2 = pre
        * (x / 2.0 * (2.0 * xi2 * (vs1 + 1.0) - vs1_theta) * (-b1 * u1 + a * u2)
            - xi2 * (vs1 + 2.0) * (-b1 * b1 * b2 * u1 + a * a * a * u2));
    Ok(Vector4::new(m1, n1, m2, n2))
}

/// The closed-form PML symbol Ŵ^(n).
pub fn elastic_pml_dtn_matrix(
    m: &ModeData,
    eta2: C64,
    cfg: &ProblemConfig,
) -> Result<Matrix2<C64>, SpectralError> {
    let Aux {
        x,
        xhat,
        vs1,
        xi1,
        xi2,
        vs1_theta,
        ..
    } = aux(m, eta2)?;
    let w = cfg.omega * cfg.omega * cfg.rho;
    let (a, b1, b2) = (C64::from(m.alpha_n), m.beta1, m.beta2);
    let mu2 = 2.0 * cfg.mu;
    let pre = I / (x * xhat);
    let bb = b1 * b2;
    // ς1(2ξ2 − ϑ + 1)
    let q = vs1 * (2.0 * xi2 + 1.0) - vs1_theta;
    let w11 = pre * (w * b1 * x + w * b1 * (vs1 * a * a + (vs1_theta + 2.0 * xi2) * bb));
    let w12 = pre * a * (-mu2 * x * xhat + w * x + w * bb * (q + 2.0 * xi2));
    let w21 =
        pre * a * (mu2 * x * xhat - w * x + w * bb * (q + 4.0 * xi1 * (xi2 + 1.0) - 2.0 * xi2));
    let w22 = pre * (w * b2 * x + w * b2 * ((vs1_theta + 2.0 * xi2) * a * a + vs1 * bb));
    Ok(Matrix2::new(w11, w12, w21, w22))
}

/// Ŵ^(n) by applying the boundary operator to the modal field built from the 4×4 solve.
pub fn elastic_pml_dtn_reconstructed(
    m: &ModeData,
    eta2: C64,
    cfg: &ProblemConfig,
) -> Result<Matrix2<C64>, SpectralError> {
    let mut w = Matrix2::zeros();
    for col in 0..2 {
        let mut u = Vector2::zeros();
        u[col] = C64::from(1.0);
        let c = elastic_pml_mode_system(m, eta2, u)?;
        w.set_column(col, &boundary_operator(m, cfg, &c));
    }
    Ok(w)
}

/// [−μ(∂2u1 + ∂1u2), −(2μ+λ)∂2u2 − λ∂1u1] at x2 = h2 for the modal field with coefficients c.
fn boundary_operator(m: &ModeData, cfg: &ProblemConfig, c: &Vector4<C64>) -> Vector2<C64> {
    let (a, b1, b2) = (C64::from(m.alpha_n), m.beta1, m.beta2);
    let (m1, n1, m2, n2) = (c[0], c[1], c[2], c[3]);
    let u1 = I * (a * m1 + a * n1 - b2 * m2 + b2 * n2);
    let u2 = I * (-b1 * m1 + b1 * n1 - a * m2 - a * n2);
    // d/dx2 of e^{±iβ∫_{x2}^{h2}s} at x2 = h2 is ∓iβ.
    let d2u1 =
        I * (a * m1 * (-I * b1) + a * n1 * (I * b1) - b2 * m2 * (-I * b2) + b2 * n2 * (I * b2));
    let d2u2 =
        I * (-b1 * m1 * (-I * b1) + b1 * n1 * (I * b1) - a * m2 * (-I * b2) - a * n2 * (I * b2));
    let (d1u1, d1u2) = (I * a * u1, I * a * u2);
    Vector2::new(
        -cfg.mu * (d2u1 + d1u2),
        -(2.0 * cfg.mu + cfg.lambda) * d2u2 - cfg.lambda * d1u1,
    )
}

/// Minima of Θ over propagating and over evanescent modes of the window, per wavenumber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaMinima {
    pub propagating: Option<f64>,
    pub evanescent: Option<f64>,
}

pub fn theta_minima(cfg: &ProblemConfig, k: f64) -> ThetaMinima {
    let w = config::mode_window(cfg);
    let mut out = ThetaMinima {
        propagating: None,
        evanescent: None,
    };
    for n in -w..=w {
        let (_, th, prop) = branch(k, config::alpha_n(cfg, n));
        let slot = if prop {
            &mut out.propagating
        } else {
            &mut out.evanescent
        };
        *slot = Some(slot.map_or(th, |v: f64| v.min(th)));
    }
    out
}

/// θ/(e^{cθ} − 1), the common building block of the truncation bounds.
fn decay_term(theta: f64, c: f64) -> f64 {
    theta / (c * theta).exp_m1()
}

pub fn bound_f1(cfg: &ProblemConfig, pml: &PmlConfig) -> f64 {
    let eta = pml_eta(pml).eta1;
    let th = theta_minima(cfg, cfg.kappa);
    let a = th.propagating.map(|t| 2.0 * decay_term(t, 2.0 * eta.im));
    let b = th.evanescent.map(|t| 2.0 * decay_term(t, 2.0 * eta.re));
    a.into_iter().chain(b).fold(0.0, f64::max)
}

pub fn bound_f2(cfg: &ProblemConfig, pml: &PmlConfig) -> f64 {
    let d = config::derive(cfg);
    let eta = pml_eta(pml).eta2;
    let (k1, k2) = (d.kappa1, d.kappa2);
    let w = cfg.omega * cfg.omega * cfg.rho;
    let mut decay: f64 = 0.0;
    for k in [k1, k2] {
        let th = theta_minima(cfg, k);
        if let Some(t) = th.propagating {
            decay = decay.max(decay_term(t, eta.im / 2.0));
        }
        if let Some(t) = th.evanescent {
            decay = decay.max(decay_term(t, eta.re / 2.0));
        }
    }
    let poly = [
        6.0 * k2,
        k2 * k2 + 4.0,
        8.0 * k2.powi(4),
        8.0 * k2.powi(3) / (k1 * k1),
        12.0 * (k2 * k2 + 16.0).powi(2) / (k1 * k1),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    34.0 * w / k1.powi(4) * decay * poly
}

/// The reference solution for a flat interface x2 = 0: a single reflected
/// pressure mode and one compressional plus one shear transmitted mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatInterfaceSolution {
    pub q: [C64; 3],
    pub alpha: f64,
    pub beta: f64,
    pub beta1: C64,
    pub beta2: C64,
}

pub fn flat_interface_solution(
    cfg: &ProblemConfig,
) -> Result<FlatInterfaceSolution, SpectralError> {
    if !cfg.is_flat() {
        return Err(SpectralError::Degenerate {
            n: 0,
            what: "flat profile",
        });
    }
    let m = mode(cfg, 0)?;
    let d = config::derive(cfg);
    let (a, b0, b1, b2) = (C64::from(m.alpha_n), m.beta, m.beta1, m.beta2);
    let (mu, la) = (cfg.mu, cfg.lambda);
    let w2f = cfg.omega * cfg.omega * cfg.rho_f;
    #[rustfmt::skip]
    let mat = Matrix3::new(
        I * b0, w2f * b1,                                     -w2f * a,
        C64::from(0.0), 2.0 * I * mu * a * b1,                2.0 * I * mu * b2 * b2 - I * mu * d.kappa2 * d.kappa2,
        C64::from(1.0), I * (2.0 * mu * b1 * b1 + la * d.kappa1 * d.kappa1), -2.0 * I * mu * a * b2,
    );
    let rhs = Vector3::new(I * b0, C64::from(0.0), C64::from(-1.0));
    let q = mat
        .lu()
        .solve(&rhs)
        .ok_or(SpectralError::Singular("flat-interface"))?;
    if q.iter().any(|v| !v.is_finite())
        || (mat * q - rhs).norm() > 1e-12 * (mat.norm() * q.norm() + rhs.norm())
    {
        return Err(SpectralError::Singular("flat-interface"));
    }
    Ok(FlatInterfaceSolution {
        q: [q[0], q[1], q[2]],
        alpha: m.alpha_n,
        beta: m.beta.re,
        beta1: b1,
        beta2: b2,
    })
}

impl FlatInterfaceSolution {
    /// Scattered pressure at (x1, x2), where x2 may be a complex stretched height.
    pub fn p_sc(&self, x1: f64, x2: C64) -> C64 {
        self.q[0] * (I * (self.alpha * x1 + self.beta * x2)).exp()
    }

    /// ∇p^sc in physical coordinates (x2 real).
    pub fn grad_p_sc(&self, x1: f64, x2: f64) -> [C64; 2] {
        let p = self.p_sc(x1, x2.into());
        [I * self.alpha * p, I * self.beta * p]
    }

    pub fn u(&self, x1: f64, x2: C64) -> [C64; 2] {
        let a = self.alpha;
        let e1 = self.q[1] * (I * (a * x1 - self.beta1 * x2)).exp();
        let e2 = self.q[2] * (I * (a * x1 - self.beta2 * x2)).exp();
        [a * e1 + self.beta2 * e2, -self.beta1 * e1 + a * e2]
    }

    /// Displacement gradient g[i][j] = ∂_j u_i (x2 real).
    pub fn grad_u(&self, x1: f64, x2: f64) -> [[C64; 2]; 2] {
        let a = self.alpha;
        let e1 = self.q[1] * (I * (a * x1 - self.beta1 * x2)).exp();
        let e2 = self.q[2] * (I * (a * x1 - self.beta2 * x2)).exp();
        let (d1, d21, d22) = (I * a, -I * self.beta1, -I * self.beta2);
        [
            [
                d1 * (a * e1 + self.beta2 * e2),
                d21 * a * e1 + d22 * self.beta2 * e2,
            ],
            [
                d1 * (-self.beta1 * e1 + a * e2),
                d21 * (-self.beta1 * e1) + d22 * a * e2,
            ],
        ]
    }
}

/// One line of the spectral self-check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Cross-checks closed forms against brute-force solves, the decay of Ŵ toward W,
/// and monotonicity of the truncation bounds, for the given configuration.
pub fn check_suite(cfg: &ProblemConfig, pml: &PmlConfig) -> Vec<Check> {
    let mut out = Vec::new();
    let mut push = |name: String, passed: bool, detail: String| {
        out.push(Check {
            name,
            passed,
            detail,
        })
    };
    let eta = pml_eta(pml);
    let w = config::mode_window(cfg).min(6);
    for n in -w..=w {
        let m = match mode(cfg, n) {
            Ok(m) => m,
            Err(e) => {
                push(format!("mode {n}"), false, e.to_string());
                continue;
            }
        };
        let u = Vector2::new(C64::new(1.0, 0.5), C64::new(-0.3, 0.8));
        let r = elastic_pml_closed_form(&m, eta.eta2, u).and_then(|c| {
            let b = elastic_pml_mode_system(&m, eta.eta2, u)?;
            Ok((c - b).norm() / b.norm())
        });
        match r {
            Ok(e) => push(
                format!("closed-form M/N vs 4x4, n={n}"),
                e <= 1e-10,
                format!("rel err {e:.2e}"),
            ),
            Err(e) => push(
                format!("closed-form M/N vs 4x4, n={n}"),
                false,
                e.to_string(),
            ),
        }
        let r = elastic_pml_dtn_matrix(&m, eta.eta2, cfg).and_then(|c| {
            let b = elastic_pml_dtn_reconstructed(&m, eta.eta2, cfg)?;
            Ok(max_abs(&(c - b)) / max_abs(&b))
        });
        match r {
            Ok(e) => push(
                format!("W-hat closed form vs boundary operator, n={n}"),
                e <= 1e-8,
                format!("rel err {e:.2e}"),
            ),
            Err(e) => push(
                format!("W-hat closed form vs boundary operator, n={n}"),
                false,
                e.to_string(),
            ),
        }
    }
    if let Ok(m) = mode(cfg, 0) {
        let r = (|| {
            let w0 = elastic_dtn_matrix(&m, cfg)?;
            let d1 = max_abs(&(elastic_pml_dtn_matrix(&m, eta.eta2, cfg)? - w0));
            let d2 = max_abs(&(elastic_pml_dtn_matrix(&m, 2.0 * eta.eta2, cfg)? - w0));
            Ok::<_, SpectralError>((d1, d2))
        })();
        match r {
            Ok((d1, d2)) => push(
                "W-hat -> W decay under doubled eta2, n=0".into(),
                d2 <= d1 / 10.0 || d2 <= 1e-14 * max_abs(&elastic_dtn_matrix(&m, cfg).unwrap()),
                format!("{d1:.2e} -> {d2:.2e}"),
            ),
            Err(e) => push(
                "W-hat -> W decay under doubled eta2, n=0".into(),
                false,
                e.to_string(),
            ),
        }
    }
    let f = |p: &PmlConfig| (bound_f1(cfg, p), bound_f2(cfg, p));
    let sweeps: [(&str, fn(&PmlConfig, f64) -> PmlConfig); 3] = [
        ("delta", |p, s| PmlConfig {
            delta1: p.delta1 * s,
            delta2: p.delta2 * s,
            ..*p
        }),
        ("Re sigma", |p, s| PmlConfig {
            sigma1: C64::new(p.sigma1.re * s, p.sigma1.im),
            sigma2: C64::new(p.sigma2.re * s, p.sigma2.im),
            ..*p
        }),
        ("Im sigma", |p, s| PmlConfig {
            sigma1: C64::new(p.sigma1.re, p.sigma1.im * s),
            sigma2: C64::new(p.sigma2.re, p.sigma2.im * s),
            ..*p
        }),
    ];
    for (name, sweep) in sweeps {
        let vals: Vec<_> = [1.0, 1.5, 2.0].iter().map(|&s| f(&sweep(pml, s))).collect();
        let mono = vals
            .windows(2)
            .all(|w| w[1].0 <= w[0].0 && w[1].1 <= w[0].1);
        push(
            format!("F1/F2 nonincreasing in {name}"),
            mono,
            format!(
                "F1 {:.2e}..{:.2e}, F2 {:.2e}..{:.2e}",
                vals[0].0, vals[2].0, vals[0].1, vals[2].1
            ),
        );
    }
    out
}

pub fn max_abs(m: &Matrix2<C64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ex1() -> ProblemConfig {
        ProblemConfig::flat_example()
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn mode_zero_and_one() {
        let m0 = mode(&ex1(), 0).unwrap();
        assert_relative_eq!(m0.alpha_n, 0.5);
        assert_relative_eq!(m0.beta.re, 0.866025, epsilon = 1e-6);
        assert_eq!(m0.beta.im, 0.0);
        assert!(m0.propagating);
        let m1 = mode(&ex1(), 1).unwrap();
        assert_relative_eq!(m1.alpha_n, 2.0 * PI + 0.5, max_relative = 1e-15);
        assert_relative_eq!(m1.alpha_n, 6.783185, epsilon = 1e-6);
        assert_eq!(m1.beta.re, 0.0);
        assert_relative_eq!(m1.beta.im, 6.709, epsilon = 1e-3);
        assert!(!m1.propagating);
    }

    #[test]
    fn normal_incidence_symmetry() {
        let cfg = ProblemConfig {
            theta: 0.0,
            ..ex1()
        };
        for n in 1..5 {
            let (p, q) = (mode(&cfg, n).unwrap(), mode(&cfg, -n).unwrap());
            assert_eq!(p.alpha_n, -q.alpha_n);
            assert_eq!(p.beta, q.beta);
            assert_eq!(p.beta2, q.beta2);
        }
    }

    #[test]
    fn dtn_coefficients() {
        let m0 = mode(&ex1(), 0).unwrap();
        assert!(close(
            acoustic_dtn_coeff(&m0),
            C64::new(0.0, 0.75f64.sqrt()),
            1e-15
        ));
        let m1 = mode(&ex1(), 1).unwrap();
        let c = acoustic_dtn_coeff(&m1);
        assert_eq!(c.im, 0.0);
        assert_relative_eq!(c.re, -m1.theta);
        let cfg = ProblemConfig {
            theta: 0.0,
            ..ex1()
        };
        assert!(close(
            acoustic_dtn_coeff(&mode(&cfg, 0).unwrap()),
            C64::new(0.0, 1.0),
            1e-15
        ));
    }

    #[test]
    fn elastic_dtn_structure() {
        let cfg = ProblemConfig {
            theta: 0.0,
            ..ex1()
        };
        let m = mode(&cfg, 0).unwrap();
        let w = elastic_dtn_matrix(&m, &cfg).unwrap();
        assert_eq!(w[(0, 1)].norm(), 0.0);
        assert_eq!(w[(1, 0)].norm(), 0.0);
        let w2 = cfg.omega * cfg.omega * cfg.rho;
        let x = m.beta1 * m.beta2;
        assert!(close(w[(0, 0)], I * w2 * m.beta1 / x, 1e-14));
        assert!(close(w[(1, 1)], I * w2 * m.beta2 / x, 1e-14));

        let m = mode(&ex1(), 0).unwrap();
        let w = elastic_dtn_matrix(&m, &ex1()).unwrap();
        assert!(close(w[(0, 1)], -w[(1, 0)], 1e-15));
    }

    #[test]
    fn eta_closed_form() {
        let p = PmlConfig::uniform(3.0, C64::new(0.0, 0.0), 2.0);
        assert_eq!(pml_eta(&p).eta1, C64::new(3.0, 0.0));
        let p = PmlConfig::uniform(3.0, C64::new(3.0, 3.0), 2.0);
        assert!(close(pml_eta(&p).eta1, C64::new(6.0, 3.0), 1e-15));
        let q = PmlConfig::uniform(6.0, C64::new(3.0, 3.0), 2.0);
        assert!(close(pml_eta(&q).eta2, 2.0 * pml_eta(&p).eta2, 1e-15));
    }

    #[test]
    fn eta_matches_quadrature_of_medium() {
        let cfg = ex1();
        let p = PmlConfig {
            delta1: 2.5,
            delta2: 1.5,
            sigma1: C64::new(7.0, 11.0),
            sigma2: C64::new(2.0, 5.0),
            t: 2.7,
        };
        let med = p.medium(&cfg);
        // Composite Simpson with many panels as an independent integral.
        let simpson = |a: f64, b: f64| {
            let n = 20000;
            let h = (b - a) / n as f64;
            let mut s = med.s(a) + med.s(b);
            for i in 1..n {
                s += med.s(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let e = pml_eta(&p);
        assert!(close(simpson(cfg.h1, cfg.h1 + 2.5), e.eta1, 1e-12));
        assert!(close(simpson(cfg.h2 - 1.5, cfg.h2), e.eta2, 1e-12));
    }

    #[test]
    fn pml_acoustic_coefficient() {
        let m1 = mode(&ex1(), 1).unwrap();
        let c = acoustic_pml_dtn_coeff(&m1, C64::new(40.0, 5.0));
        assert!((c - C64::from(-m1.theta)).norm() <= 1e-15 * m1.theta);

        let m0 = mode(&ex1(), 0).unwrap();
        let eta = C64::new(6.0, 3.0);
        let c = acoustic_pml_dtn_coeff(&m0, eta);
        let bound = 2.0 * m0.theta / ((2.0 * eta.im * m0.theta).exp() - 1.0);
        assert!((c - acoustic_dtn_coeff(&m0)).norm() <= bound);

        // Real β and η: compare with the defining exponential ratio.
        let eta = C64::new(0.7, 0.0);
        let y = -I * m0.beta * eta;
        let coth = (y.exp() + (-y).exp()) / (y.exp() - (-y).exp());
        assert!(close(
            acoustic_pml_dtn_coeff(&m0, eta),
            I * m0.beta * coth,
            1e-13
        ));
    }

    #[test]
    fn mode_system_linear_and_homogeneous() {
        let m = mode(&ex1(), 0).unwrap();
        let eta = C64::new(6.0, 3.0);
        let z = elastic_pml_mode_system(&m, eta, Vector2::zeros()).unwrap();
        assert_eq!(z.norm(), 0.0);
        assert_eq!(
            elastic_pml_closed_form(&m, eta, Vector2::zeros())
                .unwrap()
                .norm(),
            0.0
        );
        let u = Vector2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        let a = elastic_pml_mode_system(&m, eta, u).unwrap();
        let b = elastic_pml_mode_system(&m, eta, u * C64::from(2.0)).unwrap();
        assert!((b - a * C64::from(2.0)).norm() <= 1e-14 * a.norm());
        let c = elastic_pml_closed_form(&m, eta, u).unwrap();
        assert!((c - a).norm() <= 1e-10 * a.norm());
    }

    #[test]
    fn mode_system_against_unscaled_matrix() {
        // For moderate η the printed (unscaled) matrix is well conditioned.
        let m = mode(&ex1(), -1).unwrap();
        let eta = C64::new(1.5, 0.7);
        let u = Vector2::new(C64::new(0.3, -1.0), C64::new(2.0, 0.5));
        let c = elastic_pml_mode_system(&m, eta, u).unwrap();
        let (a, b1, b2) = (C64::from(m.alpha_n), m.beta1, m.beta2);
        let e = |b: C64, s: f64| (I * b * eta * s).exp();
        #[rustfmt::skip]
        let mat = Matrix4::new(
            a, a, -b2, b2,
            -b1, b1, -a, -a,
            a * e(b1, 1.0), a * e(b1, -1.0), -b2 * e(b2, 1.0), b2 * e(b2, -1.0),
            -b1 * e(b1, 1.0), b1 * e(b1, -1.0), -a * e(b2, 1.0), -a * e(b2, -1.0),
        );
        let rhs = Vector4::new(-I * u[0], -I * u[1], C64::from(0.0), C64::from(0.0));
        assert!((mat * c - rhs).norm() <= 1e-11 * rhs.norm());
    }

    #[test]
    fn closed_form_limit_is_geometric() {
        // As Im η2 grows the coefficients approach their half-space limits geometrically.
        let m = mode(&ex1(), 0).unwrap();
        let u = Vector2::new(C64::new(1.0, 0.0), C64::new(0.5, 0.5));
        let inf = elastic_pml_closed_form(&m, C64::new(1e3, 1e3), u).unwrap();
        let e20 = (elastic_pml_closed_form(&m, C64::new(3.0, 20.0), u).unwrap() - inf).norm();
        let e40 = (elastic_pml_closed_form(&m, C64::new(3.0, 40.0), u).unwrap() - inf).norm();
        assert!(e20 < 1e-10 && e40 < e20 * 1e-6 + 1e-16, "{e20:e} {e40:e}");
        // In the limit N-coefficients (growing toward the outer boundary) vanish.
        assert!(inf[1].norm() < 1e-15 && inf[3].norm() < 1e-15);
    }

    #[test]
    fn what_converges_to_w() {
        let cfg = ex1();
        let m = mode(&cfg, 0).unwrap();
        let w = elastic_dtn_matrix(&m, &cfg).unwrap();
        let wh = elastic_pml_dtn_matrix(&m, C64::new(40.0, 20.0), &cfg).unwrap();
        assert!(max_abs(&(wh - w)) <= 1e-8);
    }

    #[test]
    fn what_matches_boundary_operator() {
        let cfg = ex1();
        for n in -3..=3 {
            let m = mode(&cfg, n).unwrap();
            for eta in [C64::new(2.0, 1.0), C64::new(6.0, 3.0), C64::new(40.0, 20.0)] {
                let a = elastic_pml_dtn_matrix(&m, eta, &cfg).unwrap();
                let b = elastic_pml_dtn_reconstructed(&m, eta, &cfg).unwrap();
                assert!(max_abs(&(a - b)) <= 1e-8 * max_abs(&b), "n={n} eta={eta}");
            }
        }
    }

    #[test]
    fn what_without_inertia() {
        let cfg = ProblemConfig { rho: 0.0, ..ex1() };
        // Wavenumbers are formally zero here; build the mode by hand from Example 1's α.
        let m = ModeData {
            beta1: C64::new(0.0, 2.0),
            beta2: C64::new(0.0, 1.5),
            ..mode(&ex1(), 0).unwrap()
        };
        let w = elastic_pml_dtn_matrix(&m, C64::new(3.0, 2.0), &cfg).unwrap();
        assert_eq!(w[(0, 0)].norm(), 0.0);
        assert_eq!(w[(1, 1)].norm(), 0.0);
        assert!(close(w[(0, 1)], -2.0 * cfg.mu * m.alpha_n * I, 1e-14));
        assert!(close(w[(1, 0)], 2.0 * cfg.mu * m.alpha_n * I, 1e-14));
    }

    #[test]
    fn example_theta_minima() {
        let cfg = ex1();
        let t = theta_minima(&cfg, cfg.kappa);
        assert_relative_eq!(t.propagating.unwrap(), 0.75f64.sqrt(), max_relative = 1e-14);
        // Nearest evanescent mode is n = −1 with α = 0.5 − 2π.
        let a = 2.0 * PI - 0.5;
        assert_relative_eq!(
            t.evanescent.unwrap(),
            (a * a - 1.0).sqrt(),
            max_relative = 1e-14
        );
        assert_relative_eq!(t.evanescent.unwrap(), 5.696, epsilon = 1e-3);
    }

    #[test]
    fn bounds_decay_with_thickness() {
        let cfg = ex1();
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for d in [1.0, 2.0, 4.0, 8.0] {
            let p = PmlConfig::uniform(d, C64::new(2.0, 2.0), 2.0);
            let f = (bound_f1(&cfg, &p), bound_f2(&cfg, &p));
            assert!(f.0 < prev.0 && f.1 < prev.1);
            prev = f;
        }
        let p = PmlConfig::uniform(1e3, C64::new(2.0, 2.0), 2.0);
        assert!(bound_f1(&cfg, &p) < 1e-200);
        assert!(bound_f2(&cfg, &p) < 1e-200);
    }

    #[test]
    fn f1_strictly_decreasing_in_im_sigma() {
        let cfg = ex1();
        let v: Vec<f64> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&s| bound_f1(&cfg, &PmlConfig::uniform(3.0, C64::new(1.0, s), 2.0)))
            .collect();
        assert!(v[1] < v[0] && v[2] < v[1]);
    }

    #[test]
    fn flat_solution_residual_and_interface_conditions() {
        let cfg = ex1();
        let sol = flat_interface_solution(&cfg).unwrap();
        let d = config::derive(&cfg);
        let (mu, la) = (cfg.mu, cfg.lambda);
        let w2f = cfg.omega * cfg.omega * cfg.rho_f;
        for &x1 in &[0.0, 0.13, 0.5, 0.77] {
            let pin = (I * (d.alpha * x1)).exp();
            let dpin = -I * d.beta * pin;
            let g = sol.grad_p_sc(x1, 0.0);
            let u = sol.u(x1, C64::from(0.0));
            let gu = sol.grad_u(x1, 0.0);
            // n = (0, 1): ∂_n(p^in + p^sc) = ρf ω² u2
            assert!(close(dpin + g[1], w2f * u[1], 1e-10));
            // −(p^in + p^sc) n = σ(u) n
            let p = pin + sol.p_sc(x1, C64::from(0.0));
            let div = gu[0][0] + gu[1][1];
            let t = [mu * (gu[0][1] + gu[1][0]), la * div + 2.0 * mu * gu[1][1]];
            assert!(t[0].norm() < 1e-10);
            assert!(close(-p, t[1], 1e-10));
        }
    }

    #[test]
    fn flat_solution_satisfies_field_equations() {
        let cfg = ex1();
        let sol = flat_interface_solution(&cfg).unwrap();
        // Second differences of the modal fields.
        let (x1, x2, h) = (0.3, -0.4, 1e-4);
        let lap = |f: &dyn Fn(f64, f64) -> C64| {
            (f(x1 + h, x2) + f(x1 - h, x2) + f(x1, x2 + h) + f(x1, x2 - h) - 4.0 * f(x1, x2))
                / (h * h)
        };
        let p = |a: f64, b: f64| sol.p_sc(a, C64::from(b));
        assert!(close(lap(&p), -cfg.kappa * cfg.kappa * p(x1, x2), 1e-5));
        // Navier: μΔu + (λ+μ)∇∇·u + ω²ρu = 0 via finite differences of the gradient evaluator.
        let div = |a: f64, b: f64| {
            let g = sol.grad_u(a, b);
            g[0][0] + g[1][1]
        };
        for i in 0..2 {
            let ui = |a: f64, b: f64| sol.u(a, C64::from(b))[i];
            let grad_div = if i == 0 {
                (div(x1 + h, x2) - div(x1 - h, x2)) / (2.0 * h)
            } else {
                (div(x1, x2 + h) - div(x1, x2 - h)) / (2.0 * h)
            };
            let r = cfg.mu * lap(&ui)
                + (cfg.lambda + cfg.mu) * grad_div
                + cfg.omega * cfg.omega * cfg.rho * ui(x1, x2);
            assert!(r.norm() < 1e-5, "component {i}: {r}");
        }
    }

    #[test]
    fn flat_solution_quasi_periodic() {
        let cfg = ex1();
        let sol = flat_interface_solution(&cfg).unwrap();
        let ph = (I * sol.alpha * cfg.period).exp();
        for &(x1, x2) in &[(0.1, 0.3), (0.7, 0.9)] {
            let a = sol.p_sc(x1 + cfg.period, C64::from(x2));
            let b = ph * sol.p_sc(x1, C64::from(x2));
            assert!(close(a, b, 1e-14));
        }
        // Single-mode ansatz: the discrete Fourier coefficient on a line picks out q1 only.
        let x2 = 0.4;
        let nq = 64;
        for n in -3i64..=3 {
            let an = 2.0 * PI * n as f64 + sol.alpha;
            let c: C64 = (0..nq)
                .map(|k| {
                    let x1 = k as f64 / nq as f64;
                    sol.p_sc(x1, C64::from(x2)) * (-I * an * x1).exp()
                })
                .sum::<C64>()
                / nq as f64;
            let expect = if n == 0 {
                sol.q[0] * (I * sol.beta * x2).exp()
            } else {
                C64::from(0.0)
            };
            assert!(close(c, expect, 1e-12), "n={n}");
        }
    }

    #[test]
    fn suite_passes_on_example() {
        let cfg = ex1();
        let pml = PmlConfig::uniform(3.0, C64::new(64.0, 64.0), 2.0);
        for c in check_suite(&cfg, &pml) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
