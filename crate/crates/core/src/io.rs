//! File formats: environment and trajectory JSON, sampled CSV, SVG overlays.
//!
//! Every number is written with 17 significant digits, which round-trips any
//! `f64` exactly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::bvp::BoundaryConditions;
use crate::geometry::{EnvironmentSpec, GeometryError, PolygonEnvironment, Vec2};
use crate::trajectory::{CubicArc, Junction, Trajectory};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid trajectory: {0}")]
    Trajectory(String),
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        IoError::Json { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

/// `f64` that serializes with 17 significant digits (`null` when not finite).
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(transparent)]
pub struct Num(pub f64);

/// Exponent form with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(fmt17(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

fn pair(v: &Vec2) -> [Num; 2] {
    [Num(v.x), Num(v.y)]
}

fn unpair(p: &[Num; 2]) -> Vec2 {
    Vec2::new(p[0].0, p[1].0)
}

#[derive(Serialize, Deserialize)]
struct EnvironmentFile {
    vertices: Vec<[Num; 2]>,
    polygons: Vec<Vec<usize>>,
    #[serde(default = "zero")]
    clearance: Num,
}

fn zero() -> Num {
    Num(0.0)
}

pub fn environment_to_json(env: &PolygonEnvironment) -> String {
    let spec = env.to_spec();
    let file = EnvironmentFile {
        vertices: spec.vertices.iter().map(|v| [Num(v[0]), Num(v[1])]).collect(),
        polygons: spec.polygons,
        clearance: Num(spec.clearance),
    };
    serde_json::to_string_pretty(&file).expect("environment serializes") + "\n"
}

/// Parses and validates an environment file.
pub fn environment_from_json(text: &str) -> Result<PolygonEnvironment, IoError> {
    let spec: EnvironmentSpec = serde_json::from_str(text)?;
    Ok(PolygonEnvironment::from_spec(&spec)?)
}

#[derive(Serialize, Deserialize)]
struct ArcFile {
    t_start: Num,
    t_end: Num,
    a3: [Num; 2],
    a2: [Num; 2],
    a1: [Num; 2],
    a0: [Num; 2],
}

#[derive(Serialize, Deserialize)]
struct JunctionFile {
    vertex: usize,
    time: Num,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryFile {
    arcs: Vec<ArcFile>,
    junctions: Vec<JunctionFile>,
    energy: Num,
}

/// Raw absolute-time coefficients and junction times.
pub fn trajectory_to_json(traj: &Trajectory) -> String {
    let file = TrajectoryFile {
        arcs: traj
            .arcs
            .iter()
            .map(|a| ArcFile {
                t_start: Num(a.t_start),
                t_end: Num(a.t_end),
                a3: pair(&a.a3()),
                a2: pair(&a.a2()),
                a1: pair(&a.a1()),
                a0: pair(&a.a0()),
            })
            .collect(),
        junctions: traj.junctions.iter().map(|j| JunctionFile { vertex: j.vertex, time: Num(j.time) }).collect(),
        energy: Num(traj.energy()),
    };
    serde_json::to_string_pretty(&file).expect("trajectory serializes") + "\n"
}

pub fn trajectory_from_json(text: &str) -> Result<Trajectory, IoError> {
    let file: TrajectoryFile = serde_json::from_str(text)?;
    if file.arcs.is_empty() || file.arcs.len() != file.junctions.len() + 1 {
        return Err(IoError::Trajectory(format!(
            "{} arcs do not match {} junctions",
            file.arcs.len(),
            file.junctions.len()
        )));
    }
    let arcs = file
        .arcs
        .iter()
        .map(|a| CubicArc::new(unpair(&a.a3), unpair(&a.a2), unpair(&a.a1), unpair(&a.a0), a.t_start.0, a.t_end.0))
        .collect();
    let junctions = file.junctions.iter().map(|j| Junction { vertex: j.vertex, time: j.time.0 }).collect();
    Ok(Trajectory::new(arcs, junctions))
}

/// Samples at `rate` Hz: columns `t, px, py, vx, vy, ux, uy`.
pub fn trajectory_csv(traj: &Trajectory, rate: f64) -> String {
    let mut out = String::from("t,px,py,vx,vy,ux,uy\n");
    for (t, s) in traj.sample(rate) {
        let row = [t, s.p.x, s.p.y, s.v.x, s.v.y, s.u.x, s.u.y].map(fmt17);
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Extra polylines drawn on an SVG overlay, such as baseline paths.
pub struct Overlay<'a> {
    pub points: &'a [Vec2],
    pub color: &'a str,
    pub label: &'a str,
}

const PX_PER_M: f64 = 50.0;
const MARGIN_M: f64 = 0.5;

/// Environment, trajectory and markers at 50 px/m with y pointing up.
///
/// Palette: obstacles light grey with dark outline, vertices dark grey dots,
/// trajectory blue, start green circle, goal red star, overlays dashed.
pub fn render_svg(
    env: &PolygonEnvironment,
    bc: &BoundaryConditions,
    trajectory: Option<&Trajectory>,
    rate: f64,
    overlays: &[Overlay],
) -> String {
    let samples: Vec<Vec2> =
        trajectory.map(|t| t.sample(rate).into_iter().map(|(_, s)| s.p).collect()).unwrap_or_default();
    let mut lo = bc.p0;
    let mut hi = bc.p0;
    let ends = [bc.p0, bc.pf];
    let all = env
        .vertices()
        .iter()
        .chain(ends.iter())
        .chain(samples.iter())
        .chain(overlays.iter().flat_map(|o| o.points.iter()));
    for p in all {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    lo -= Vec2::new(MARGIN_M, MARGIN_M);
    hi += Vec2::new(MARGIN_M, MARGIN_M);
    let width = (hi.x - lo.x) * PX_PER_M;
    let height = (hi.y - lo.y) * PX_PER_M;
    let px = |p: &Vec2| ((p.x - lo.x) * PX_PER_M, (hi.y - p.y) * PX_PER_M);
    let pts = |ps: &mut dyn Iterator<Item = &Vec2>| {
        ps.map(|p| {
            let (x, y) = px(p);
            format!("{x:.3},{y:.3}")
        })
        .collect::<Vec<_>>()
        .join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.3}" height="{height:.3}" viewBox="0 0 {width:.3} {height:.3}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    for ring in env.polygons() {
        let p = pts(&mut ring.iter().map(|&i| &env.vertices()[i]));
        let _ = writeln!(s, r##"<polygon points="{p}" fill="#d9d9d9" stroke="#404040" stroke-width="1.5"/>"##);
    }
    for v in env.vertices() {
        let (x, y) = px(v);
        let _ = writeln!(s, r##"<circle cx="{x:.3}" cy="{y:.3}" r="2.000" fill="#404040"/>"##);
    }
    for o in overlays {
        let p = pts(&mut o.points.iter());
        let _ = writeln!(
            s,
            r#"<polyline points="{p}" fill="none" stroke="{}" stroke-width="1.5" stroke-dasharray="6,4"><title>{}</title></polyline>"#,
            o.color, o.label
        );
    }
    if !samples.is_empty() {
        let p = pts(&mut samples.iter());
        let _ = writeln!(s, r##"<polyline points="{p}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##);
    }
    let (sx, sy) = px(&bc.p0);
    let _ = writeln!(s, r##"<circle cx="{sx:.3}" cy="{sy:.3}" r="6.000" fill="#2ca02c" stroke="#000000"/>"##);
    let star: Vec<Vec2> = (0..10)
        .map(|i| {
            let r = if i % 2 == 0 { 9.0 } else { 4.0 } / PX_PER_M;
            let a = std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / 5.0;
            bc.pf + Vec2::new(a.cos(), a.sin()) * r
        })
        .collect();
    let p = pts(&mut star.iter());
    let _ = writeln!(s, r##"<polygon points="{p}" fill="#d62728" stroke="#000000"/>"##);
    s.push_str("</svg>\n");
    s
}
