//! Plot-ready grids: solution surfaces, cross-sections, an error heat map,
//! and gradient fields
//!
//! Everything here samples on a uniform (x, t) grid and writes the long
//! form `x,t,value…` CSV, x varying fastest, with the axis sizes in the
//! metadata so parsers can rebuild the grid without guessing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::csvio::{parse_f64, parse_usize, CsvDoc};
use super::ReportError;
use crate::autodiff::Direction;
use crate::network::MlpModel;
use crate::oracle::ProblemTag;
use crate::pde::ProblemSpec;

/// Cross-section times matching the published solution-curve figures.
pub fn section_times(tag: ProblemTag) -> &'static [f64] {
    match tag {
        ProblemTag::P1 => &[0.0, 0.4, 0.8, 1.0],
        ProblemTag::P2 => &[1.7, 2.4, 2.5, 2.6, 3.0],
    }
}

fn check_spacing(field: &str, step: f64) -> Result<(), ReportError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(ReportError::Config {
            field: field.to_string(),
            message: format!("grid spacing must be finite and positive, got {step}"),
        });
    }
    Ok(())
}

/// Uniform samples of [lo, hi]: the step count is the rounded quotient and
/// the last sample is clamped onto the upper bound, so 0.01 on [0, 1] gives
/// exactly 101 points ending at 1.0.
fn axis(field: &str, lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, ReportError> {
    check_spacing(field, step)?;
    let n = ((hi - lo) / step).round().max(1.0) as usize;
    Ok((0..=n).map(|i| (lo + i as f64 * step).min(hi)).collect())
}

/// One scalar field sampled on the grid, values row-major over t then x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub label: String,
    pub problem: ProblemTag,
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    pub values: Vec<f64>,
}

impl SurfaceGrid {
    fn build(
        label: &str,
        problem: ProblemTag,
        xs: Vec<f64>,
        ts: Vec<f64>,
        mut f: impl FnMut(f64, f64) -> Result<f64, ReportError>,
    ) -> Result<SurfaceGrid, ReportError> {
        let mut values = Vec::with_capacity(xs.len() * ts.len());
        for &t in &ts {
            for &x in &xs {
                values.push(f(x, t)?);
            }
        }
        Ok(SurfaceGrid {
            label: label.to_string(),
            problem,
            xs,
            ts,
            values,
        })
    }

    pub fn value(&self, xi: usize, ti: usize) -> f64 {
        self.values[ti * self.xs.len() + xi]
    }

    /// Looks a grid point up by coordinates (within 1e-9).
    pub fn at(&self, x: f64, t: f64) -> Option<f64> {
        let xi = self.xs.iter().position(|&v| (v - x).abs() < 1e-9)?;
        let ti = self.ts.iter().position(|&v| (v - t).abs() < 1e-9)?;
        Some(self.value(xi, ti))
    }

    pub fn to_csv(&self) -> String {
        let mut doc = CsvDoc::new(&["x", "t", "value"]);
        doc.add_meta("grid", "surface");
        doc.add_meta("label", &self.label);
        doc.add_meta("problem", self.problem.label());
        doc.add_meta("nx", self.xs.len());
        doc.add_meta("nt", self.ts.len());
        for (ti, &t) in self.ts.iter().enumerate() {
            for (xi, &x) in self.xs.iter().enumerate() {
                doc.rows.push(vec![
                    x.to_string(),
                    t.to_string(),
                    self.value(xi, ti).to_string(),
                ]);
            }
        }
        doc.emit()
    }

    pub fn from_csv(text: &str) -> Result<SurfaceGrid, ReportError> {
        let doc = CsvDoc::parse(text)?;
        doc.expect_header(&["x", "t", "value"])?;
        let (problem, xs, ts) = parse_grid_meta(&doc, "surface")?;
        let mut values = Vec::with_capacity(doc.rows.len());
        for (i, fields) in doc.rows.iter().enumerate() {
            check_grid_row(&xs, &ts, i, &fields[0], &fields[1])?;
            values.push(parse_f64(&fields[2], "surface value")?);
        }
        Ok(SurfaceGrid {
            label: doc.meta_value("label")?.to_string(),
            problem,
            xs,
            ts,
            values,
        })
    }
}

/// (u_x, u_t) sampled on the grid, both components row-major over t then x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientGrid {
    pub label: String,
    pub problem: ProblemTag,
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    pub u_x: Vec<f64>,
    pub u_t: Vec<f64>,
}

impl GradientGrid {
    fn build(
        label: &str,
        problem: ProblemTag,
        xs: Vec<f64>,
        ts: Vec<f64>,
        mut f: impl FnMut(f64, f64) -> Result<(f64, f64), ReportError>,
    ) -> Result<GradientGrid, ReportError> {
        let mut u_x = Vec::with_capacity(xs.len() * ts.len());
        let mut u_t = Vec::with_capacity(xs.len() * ts.len());
        for &t in &ts {
            for &x in &xs {
                let (gx, gt) = f(x, t)?;
                u_x.push(gx);
                u_t.push(gt);
            }
        }
        Ok(GradientGrid {
            label: label.to_string(),
            problem,
            xs,
            ts,
            u_x,
            u_t,
        })
    }

    pub fn at(&self, x: f64, t: f64) -> Option<(f64, f64)> {
        let xi = self.xs.iter().position(|&v| (v - x).abs() < 1e-9)?;
        let ti = self.ts.iter().position(|&v| (v - t).abs() < 1e-9)?;
        let i = ti * self.xs.len() + xi;
        Some((self.u_x[i], self.u_t[i]))
    }

    pub fn to_csv(&self) -> String {
        let mut doc = CsvDoc::new(&["x", "t", "u_x", "u_t"]);
        doc.add_meta("grid", "gradient");
        doc.add_meta("label", &self.label);
        doc.add_meta("problem", self.problem.label());
        doc.add_meta("nx", self.xs.len());
        doc.add_meta("nt", self.ts.len());
        for (ti, &t) in self.ts.iter().enumerate() {
            for (xi, &x) in self.xs.iter().enumerate() {
                let i = ti * self.xs.len() + xi;
                doc.rows.push(vec![
                    x.to_string(),
                    t.to_string(),
                    self.u_x[i].to_string(),
                    self.u_t[i].to_string(),
                ]);
            }
        }
        doc.emit()
    }

    pub fn from_csv(text: &str) -> Result<GradientGrid, ReportError> {
        let doc = CsvDoc::parse(text)?;
        doc.expect_header(&["x", "t", "u_x", "u_t"])?;
        let (problem, xs, ts) = parse_grid_meta(&doc, "gradient")?;
        let mut u_x = Vec::with_capacity(doc.rows.len());
        let mut u_t = Vec::with_capacity(doc.rows.len());
        for (i, fields) in doc.rows.iter().enumerate() {
            check_grid_row(&xs, &ts, i, &fields[0], &fields[1])?;
            u_x.push(parse_f64(&fields[2], "gradient u_x")?);
            u_t.push(parse_f64(&fields[3], "gradient u_t")?);
        }
        Ok(GradientGrid {
            label: doc.meta_value("label")?.to_string(),
            problem,
            xs,
            ts,
            u_x,
            u_t,
        })
    }
}

/// Model and oracle curves u(x, t_s) at the published section times,
/// values indexed section-major: `model[si * xs.len() + xi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSections {
    pub problem: ProblemTag,
    pub sections: Vec<f64>,
    pub xs: Vec<f64>,
    pub model: Vec<f64>,
    pub oracle: Vec<f64>,
}

impl CrossSections {
    pub fn model_curve(&self, si: usize) -> &[f64] {
        &self.model[si * self.xs.len()..(si + 1) * self.xs.len()]
    }

    pub fn oracle_curve(&self, si: usize) -> &[f64] {
        &self.oracle[si * self.xs.len()..(si + 1) * self.xs.len()]
    }

    pub fn to_csv(&self) -> String {
        let mut doc = CsvDoc::new(&["x", "t", "model", "oracle"]);
        doc.add_meta("grid", "cross_sections");
        doc.add_meta("problem", self.problem.label());
        doc.add_meta("nx", self.xs.len());
        let joined: Vec<String> = self.sections.iter().map(|t| t.to_string()).collect();
        doc.add_meta("sections", joined.join(" "));
        for (si, &t) in self.sections.iter().enumerate() {
            for (xi, &x) in self.xs.iter().enumerate() {
                let i = si * self.xs.len() + xi;
                doc.rows.push(vec![
                    x.to_string(),
                    t.to_string(),
                    self.model[i].to_string(),
                    self.oracle[i].to_string(),
                ]);
            }
        }
        doc.emit()
    }

    pub fn from_csv(text: &str) -> Result<CrossSections, ReportError> {
        let doc = CsvDoc::parse(text)?;
        doc.expect_header(&["x", "t", "model", "oracle"])?;
        let problem = parse_problem_meta(&doc)?;
        let nx = parse_usize(doc.meta_value("nx")?, "cross-section nx")?;
        let sections = doc
            .meta_value("sections")?
            .split_whitespace()
            .map(|s| parse_f64(s, "cross-section time"))
            .collect::<Result<Vec<f64>, ReportError>>()?;
        if doc.rows.len() != nx * sections.len() {
            return Err(ReportError::Parse {
                what: "cross-section csv".to_string(),
                detail: format!(
                    "expected {} rows, got {}",
                    nx * sections.len(),
                    doc.rows.len()
                ),
            });
        }
        let xs: Vec<f64> = doc.rows[..nx]
            .iter()
            .map(|f| parse_f64(&f[0], "cross-section x"))
            .collect::<Result<_, _>>()?;
        let mut model = Vec::with_capacity(doc.rows.len());
        let mut oracle = Vec::with_capacity(doc.rows.len());
        for fields in &doc.rows {
            model.push(parse_f64(&fields[2], "cross-section model")?);
            oracle.push(parse_f64(&fields[3], "cross-section oracle")?);
        }
        Ok(CrossSections {
            problem,
            sections,
            xs,
            model,
            oracle,
        })
    }
}

fn parse_problem_meta(doc: &CsvDoc) -> Result<ProblemTag, ReportError> {
    let label = doc.meta_value("problem")?;
    ProblemTag::from_label(label).ok_or_else(|| ReportError::Parse {
        what: "grid csv".to_string(),
        detail: format!("unknown problem label `{label}`"),
    })
}

fn parse_grid_meta(
    doc: &CsvDoc,
    kind: &str,
) -> Result<(ProblemTag, Vec<f64>, Vec<f64>), ReportError> {
    if doc.meta_value("grid")? != kind {
        return Err(ReportError::Parse {
            what: "grid csv".to_string(),
            detail: format!("expected a {kind} grid, got `{}`", doc.meta_value("grid")?),
        });
    }
    let problem = parse_problem_meta(doc)?;
    let nx = parse_usize(doc.meta_value("nx")?, "grid nx")?;
    let nt = parse_usize(doc.meta_value("nt")?, "grid nt")?;
    if doc.rows.len() != nx * nt {
        return Err(ReportError::Parse {
            what: "grid csv".to_string(),
            detail: format!("expected {} rows, got {}", nx * nt, doc.rows.len()),
        });
    }
    let xs: Vec<f64> = doc.rows[..nx]
        .iter()
        .map(|f| parse_f64(&f[0], "grid x"))
        .collect::<Result<_, _>>()?;
    let ts: Vec<f64> = (0..nt)
        .map(|ti| parse_f64(&doc.rows[ti * nx][1], "grid t"))
        .collect::<Result<_, _>>()?;
    Ok((problem, xs, ts))
}

fn check_grid_row(
    xs: &[f64],
    ts: &[f64],
    i: usize,
    x_field: &str,
    t_field: &str,
) -> Result<(), ReportError> {
    let x = parse_f64(x_field, "grid x")?;
    let t = parse_f64(t_field, "grid t")?;
    if x != xs[i % xs.len()] || t != ts[i / xs.len()] {
        return Err(ReportError::Parse {
            what: "grid csv".to_string(),
            detail: format!("row {i} is out of row-major order at ({x}, {t})"),
        });
    }
    Ok(())
}

pub fn model_surface(
    model: &MlpModel,
    problem: &ProblemSpec,
    dx: f64,
    dt: f64,
) -> Result<SurfaceGrid, ReportError> {
    let xs = axis("dx", problem.x_range.0, problem.x_range.1, dx)?;
    let ts = axis("dt", problem.t_range.0, problem.t_range.1, dt)?;
    SurfaceGrid::build("model", problem.tag, xs, ts, |x, t| Ok(model.forward(x, t)))
}

pub fn oracle_surface(problem: &ProblemSpec, dx: f64, dt: f64) -> Result<SurfaceGrid, ReportError> {
    let xs = axis("dx", problem.x_range.0, problem.x_range.1, dx)?;
    let ts = axis("dt", problem.t_range.0, problem.t_range.1, dt)?;
    SurfaceGrid::build("oracle", problem.tag, xs, ts, |x, t| {
        Ok(problem.exact(x, t)?)
    })
}

/// |model − oracle| on the grid.
pub fn error_surface(
    model: &MlpModel,
    problem: &ProblemSpec,
    dx: f64,
    dt: f64,
) -> Result<SurfaceGrid, ReportError> {
    let xs = axis("dx", problem.x_range.0, problem.x_range.1, dx)?;
    let ts = axis("dt", problem.t_range.0, problem.t_range.1, dt)?;
    SurfaceGrid::build("abs_error", problem.tag, xs, ts, |x, t| {
        Ok((model.forward(x, t) - problem.exact(x, t)?).abs())
    })
}

pub fn cross_sections(
    model: &MlpModel,
    problem: &ProblemSpec,
    dx: f64,
) -> Result<CrossSections, ReportError> {
    let xs = axis("dx", problem.x_range.0, problem.x_range.1, dx)?;
    let sections = section_times(problem.tag).to_vec();
    let mut model_vals = Vec::with_capacity(xs.len() * sections.len());
    let mut oracle_vals = Vec::with_capacity(xs.len() * sections.len());
    for &t in &sections {
        for &x in &xs {
            model_vals.push(model.forward(x, t));
            oracle_vals.push(problem.exact(x, t)?);
        }
    }
    Ok(CrossSections {
        problem: problem.tag,
        sections,
        xs,
        model: model_vals,
        oracle: oracle_vals,
    })
}

pub fn model_gradient(
    model: &MlpModel,
    problem: &ProblemSpec,
    dx: f64,
    dt: f64,
) -> Result<GradientGrid, ReportError> {
    let xs = axis("dx", problem.x_range.0, problem.x_range.1, dx)?;
    let ts = axis("dt", problem.t_range.0, problem.t_range.1, dt)?;
    GradientGrid::build("model", problem.tag, xs, ts, |x, t| {
        let jx = model.forward_jet(x, t, Direction::X)?;
        let jt = model.forward_jet(x, t, Direction::T)?;
        Ok((jx.d1, jt.d1))
    })
}

pub fn oracle_gradient(
    problem: &ProblemSpec,
    dx: f64,
    dt: f64,
) -> Result<GradientGrid, ReportError> {
    let xs = axis("dx", problem.x_range.0, problem.x_range.1, dx)?;
    let ts = axis("dt", problem.t_range.0, problem.t_range.1, dt)?;
    GradientGrid::build("oracle", problem.tag, xs, ts, |x, t| {
        Ok(problem.exact_gradient(x, t)?)
    })
}

/// Paths of everything [`emit_surfaces`] writes.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceArtifacts {
    pub model_surface: PathBuf,
    pub oracle_surface: PathBuf,
    pub error_surface: PathBuf,
    pub cross_sections: PathBuf,
    pub model_gradient: PathBuf,
    pub oracle_gradient: PathBuf,
}

/// Samples every plot artifact on the (dx, dt) grid and writes the six CSV
/// files into `out_dir` (created if missing): model and oracle surfaces,
/// the |model − oracle| heat map, cross-section curves at the published
/// times, and both gradient fields.
pub fn emit_surfaces(
    model: &MlpModel,
    problem: &ProblemSpec,
    dx: f64,
    dt: f64,
    out_dir: &Path,
) -> Result<SurfaceArtifacts, ReportError> {
    check_spacing("dx", dx)?;
    check_spacing("dt", dt)?;
    std::fs::create_dir_all(out_dir)?;
    let artifacts = SurfaceArtifacts {
        model_surface: out_dir.join("model_surface.csv"),
        oracle_surface: out_dir.join("oracle_surface.csv"),
        error_surface: out_dir.join("error_surface.csv"),
        cross_sections: out_dir.join("cross_sections.csv"),
        model_gradient: out_dir.join("model_gradient.csv"),
        oracle_gradient: out_dir.join("oracle_gradient.csv"),
    };
    std::fs::write(
        &artifacts.model_surface,
        model_surface(model, problem, dx, dt)?.to_csv(),
    )?;
    std::fs::write(
        &artifacts.oracle_surface,
        oracle_surface(problem, dx, dt)?.to_csv(),
    )?;
    std::fs::write(
        &artifacts.error_surface,
        error_surface(model, problem, dx, dt)?.to_csv(),
    )?;
    std::fs::write(
        &artifacts.cross_sections,
        cross_sections(model, problem, dx)?.to_csv(),
    )?;
    std::fs::write(
        &artifacts.model_gradient,
        model_gradient(model, problem, dx, dt)?.to_csv(),
    )?;
    std::fs::write(
        &artifacts.oracle_gradient,
        oracle_gradient(problem, dx, dt)?.to_csv(),
    )?;
    Ok(artifacts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_glorot, ActivationKind};
    use crate::pde::{make_problem1, make_problem2};

    fn tiny_model() -> MlpModel {
        init_glorot(&[2, 8, 1], ActivationKind::Gelu, false, 10, 3).unwrap()
    }

    #[test]
    fn centisecond_grid_has_the_documented_shape() {
        let problem = make_problem1();
        let grid = oracle_surface(&problem, 0.01, 0.01).unwrap();
        assert_eq!(grid.xs.len(), 101);
        assert_eq!(grid.ts.len(), 301);
        assert_eq!(grid.values.len(), 101 * 301);
        assert_eq!(*grid.xs.last().unwrap(), 1.0);
        assert_eq!(*grid.ts.last().unwrap(), 3.0);
        let v = grid.at(0.25, 0.4).unwrap();
        assert!((v - 0.31752).abs() < 5e-6, "u(0.25, 0.4) = {v}");
        // the t = 0 row is the initial profile
        for (xi, &x) in grid.xs.iter().enumerate() {
            assert_eq!(grid.value(xi, 0), problem.initial(x));
        }
    }

    #[test]
    fn bad_spacing_is_a_config_error() {
        let problem = make_problem1();
        let model = tiny_model();
        for step in [0.0, -0.01, f64::NAN] {
            assert!(matches!(
                oracle_surface(&problem, step, 0.1),
                Err(ReportError::Config { .. })
            ));
            assert!(matches!(
                model_surface(&model, &problem, 0.1, step),
                Err(ReportError::Config { .. })
            ));
        }
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            emit_surfaces(&model, &problem, 0.1, -1.0, dir.path()),
            Err(ReportError::Config { .. })
        ));
    }

    #[test]
    fn surface_and_gradient_round_trips_are_exact() {
        let problem = make_problem2();
        let model = tiny_model();
        let surface = error_surface(&model, &problem, 0.2, 0.5).unwrap();
        assert_eq!(SurfaceGrid::from_csv(&surface.to_csv()).unwrap(), surface);
        let gradient = model_gradient(&model, &problem, 0.2, 0.5).unwrap();
        assert_eq!(GradientGrid::from_csv(&gradient.to_csv()).unwrap(), gradient);
        let sections = cross_sections(&model, &problem, 0.2).unwrap();
        assert_eq!(CrossSections::from_csv(&sections.to_csv()).unwrap(), sections);
    }

    #[test]
    fn shuffled_grid_rows_are_rejected() {
        let problem = make_problem1();
        let surface = oracle_surface(&problem, 0.5, 1.0).unwrap();
        let csv = surface.to_csv();
        let mut lines: Vec<&str> = csv.lines().collect();
        let n = lines.len();
        lines.swap(n - 1, n - 2);
        assert!(matches!(
            SurfaceGrid::from_csv(&lines.join("\n")),
            Err(ReportError::Parse { .. })
        ));
    }

    #[test]
    fn cross_sections_start_at_the_initial_profile() {
        let problem = make_problem1();
        let sections = cross_sections(&tiny_model(), &problem, 0.1).unwrap();
        assert_eq!(sections.sections, vec![0.0, 0.4, 0.8, 1.0]);
        let si = 0;
        for (xi, &x) in sections.xs.iter().enumerate() {
            assert_eq!(sections.oracle_curve(si)[xi], problem.initial(x));
        }
        let p2 = cross_sections(&tiny_model(), &make_problem2(), 0.25).unwrap();
        assert_eq!(p2.sections, vec![1.7, 2.4, 2.5, 2.6, 3.0]);
    }

    #[test]
    fn oracle_gradient_agrees_with_finite_differences() {
        let problem = make_problem1();
        let grid = oracle_gradient(&problem, 0.25, 0.5).unwrap();
        let (u_x, u_t) = grid.at(0.5, 1.0).unwrap();
        let h = 1e-5;
        let fd_x =
            (problem.exact(0.5 + h, 1.0).unwrap() - problem.exact(0.5 - h, 1.0).unwrap())
                / (2.0 * h);
        let fd_t =
            (problem.exact(0.5, 1.0 + h).unwrap() - problem.exact(0.5, 1.0 - h).unwrap())
                / (2.0 * h);
        assert!((u_x - fd_x).abs() < 1e-7);
        assert!((u_t - fd_t).abs() < 1e-7);
        // t = 0 row carries the initial profile's derivative
        let (d1, _) = problem.tag.initial_derivs(0.25);
        assert_eq!(grid.at(0.25, 0.0).unwrap().0, d1);
    }

    #[test]
    fn model_gradient_matches_finite_differences_of_forward() {
        let problem = make_problem1();
        let model = tiny_model();
        let grid = model_gradient(&model, &problem, 0.25, 0.5).unwrap();
        let (u_x, u_t) = grid.at(0.75, 1.5).unwrap();
        let h = 1e-6;
        let fd_x = (model.forward(0.75 + h, 1.5) - model.forward(0.75 - h, 1.5)) / (2.0 * h);
        let fd_t = (model.forward(0.75, 1.5 + h) - model.forward(0.75, 1.5 - h)) / (2.0 * h);
        assert!((u_x - fd_x).abs() < 1e-8, "{u_x} vs {fd_x}");
        assert!((u_t - fd_t).abs() < 1e-8, "{u_t} vs {fd_t}");
    }

    #[test]
    fn emit_writes_six_parsable_files() {
        let problem = make_problem1();
        let model = tiny_model();
        let dir = tempfile::tempdir().unwrap();
        let arts = emit_surfaces(&model, &problem, 0.25, 0.5, dir.path()).unwrap();
        let model_grid =
            SurfaceGrid::from_csv(&std::fs::read_to_string(&arts.model_surface).unwrap()).unwrap();
        assert_eq!(model_grid, model_surface(&model, &problem, 0.25, 0.5).unwrap());
        let oracle_grid =
            SurfaceGrid::from_csv(&std::fs::read_to_string(&arts.oracle_surface).unwrap()).unwrap();
        assert_eq!(oracle_grid.label, "oracle");
        let err_grid =
            SurfaceGrid::from_csv(&std::fs::read_to_string(&arts.error_surface).unwrap()).unwrap();
        for (i, &v) in err_grid.values.iter().enumerate() {
            assert_eq!(v, (model_grid.values[i] - oracle_grid.values[i]).abs());
        }
        assert!(CrossSections::from_csv(
            &std::fs::read_to_string(&arts.cross_sections).unwrap()
        )
        .is_ok());
        assert!(GradientGrid::from_csv(
            &std::fs::read_to_string(&arts.model_gradient).unwrap()
        )
        .is_ok());
        assert!(GradientGrid::from_csv(
            &std::fs::read_to_string(&arts.oracle_gradient).unwrap()
        )
        .is_ok());
    }
}
