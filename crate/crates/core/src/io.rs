//! Legacy ASCII VTK export of meshes and fields, and the convergence CSV.

use std::io::{self, Write};

use crate::adapt::ConvergenceRecord;
use crate::mesh::Mesh;
use crate::solver::SystemState;

pub const CSV_HEADER: &str = "iter,dof,eps_f,eps_p,e_h,seconds";

pub fn write_csv<W: Write>(records: &[ConvergenceRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        let eh = r.e_h.map(|v| format!("{v:e}")).unwrap_or_default();
        writeln!(
            w,
            "{},{},{:e},{:e},{},{:.6}",
            r.iter, r.dof, r.eps_f, r.eps_p, eh, r.seconds
        )?;
    }
    Ok(())
}

/// Unstructured grid of triangles (cell type 5). Pressure arrays are zero off
/// the fluid side and displacement arrays zero off the solid side.
pub fn write_vtk<W: Write>(
    mesh: &Mesh,
    state: Option<&SystemState>,
    eta: Option<&[f64]>,
    mut w: W,
) -> io::Result<()> {
    let n = mesh.nodes.len();
    let ne = mesh.elements.len();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "aepml solution")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {n} double")?;
    for node in &mesh.nodes {
        writeln!(w, "{:e} {:e} 0", node.x[0], node.x[1])?;
    }
    writeln!(w, "CELLS {ne} {}", 4 * ne)?;
    for el in &mesh.elements {
        writeln!(w, "3 {} {} {}", el.nodes[0], el.nodes[1], el.nodes[2])?;
    }
    writeln!(w, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(w, "5")?;
    }
    if let Some(st) = state {
        writeln!(w, "POINT_DATA {n}")?;
        let fields: [(&str, Box<dyn Fn(usize) -> f64>); 6] = [
            ("p_re", Box::new(|i| st.p(i).re)),
            ("p_im", Box::new(|i| st.p(i).im)),
            ("u1_re", Box::new(|i| st.u(i)[0].re)),
            ("u1_im", Box::new(|i| st.u(i)[0].im)),
            ("u2_re", Box::new(|i| st.u(i)[1].re)),
            ("u2_im", Box::new(|i| st.u(i)[1].im)),
        ];
        for (name, f) in fields {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for i in 0..n {
                writeln!(w, "{:e}", f(i))?;
            }
        }
    }
    writeln!(w, "CELL_DATA {ne}")?;
    if let Some(eta) = eta {
        writeln!(w, "SCALARS eta double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in eta {
            writeln!(w, "{v:e}")?;
        }
    }
    writeln!(w, "SCALARS region int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for el in &mesh.elements {
        writeln!(w, "{}", el.region.code())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{PmlConfig, ProblemConfig};
    use crate::mesh::generate_initial_mesh;
    use num_complex::Complex64 as C64;

    #[test]
    fn csv_layout() {
        let r = [
            ConvergenceRecord {
                iter: 1,
                dof: 10,
                eps_f: 0.5,
                eps_p: 1e-9,
                e_h: None,
                seconds: 0.25,
            },
            ConvergenceRecord {
                iter: 2,
                dof: 40,
                eps_f: 0.25,
                eps_p: 1e-9,
                e_h: Some(0.1),
                seconds: 0.5,
            },
        ];
        let mut buf = Vec::new();
        write_csv(&r, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "1,10,5e-1,1e-9,,0.250000");
        assert_eq!(lines[2], "2,40,2.5e-1,1e-9,1e-1,0.500000");
    }

    #[test]
    fn vtk_counts() {
        let cfg = ProblemConfig::flat_example();
        let pml = PmlConfig::uniform(1.0, C64::new(1.0, 1.0), 2.0);
        let m = generate_initial_mesh(&cfg, &pml, 0.5).unwrap();
        let st = SystemState::zero(crate::assembly::DofMap::new(&m, C64::new(1.0, 0.0)));
        let eta = vec![0.0; m.elements.len()];
        let mut buf = Vec::new();
        write_vtk(&m, Some(&st), Some(&eta), &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(s.contains(&format!("POINTS {} double", m.nodes.len())));
        assert!(s.contains(&format!(
            "CELLS {} {}",
            m.elements.len(),
            4 * m.elements.len()
        )));
        for name in [
            "p_re", "p_im", "u1_re", "u1_im", "u2_re", "u2_im", "eta", "region",
        ] {
            assert!(s.contains(&format!("SCALARS {name} ")), "{name}");
        }
    }
}
