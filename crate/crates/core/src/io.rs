//! Output formats: JSON run records, CSV tables and legacy VTK meshes.

use std::fmt::Write as _;
use std::io;

use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Map, Value};

use crate::fespace::FeSpace;
use crate::mesh::Mesh;
use crate::verify::ConvergenceReport;

/// Float formatting shared by CSV and JSON: 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Pretty printer writing every float with 17 significant digits.
struct FixedDigits<'a>(PrettyFormatter<'a>);

impl Formatter for FixedDigits<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_float(value).as_bytes())
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` with two-space indentation and fixed float digits.
/// Non-finite floats become `null` (serde_json cannot hold them).
pub fn to_json_string(value: &Value) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedDigits(PrettyFormatter::new()));
    serde::Serialize::serialize(value, &mut ser).expect("writing to a Vec cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

/// JSON number, or `null` for non-finite input.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

/// Top-level record `{config, results, status, version}`.
pub fn envelope(config: Value, results: Value, status: &str) -> Value {
    let mut m = Map::new();
    m.insert("config".into(), config);
    m.insert("results".into(), results);
    m.insert("status".into(), Value::String(status.into()));
    m.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    Value::Object(m)
}

pub fn convergence_json(r: &ConvergenceReport) -> Value {
    let levels: Vec<Value> = r
        .levels
        .iter()
        .map(|l| {
            let errors: Map<String, Value> = l.errors.iter().map(|(k, v)| (k.clone(), num(*v))).collect();
            json!({"n": l.n, "h": num(l.h), "errors": errors})
        })
        .collect();
    let slopes: Map<String, Value> = r.slopes.iter().map(|(k, v)| (k.clone(), num(*v))).collect();
    let failures: Vec<Value> = r.failures.iter().map(|(n, e)| json!({"n": n, "error": e.to_string()})).collect();
    json!({
        "method": r.method,
        "problem": r.problem,
        "levels": levels,
        "slopes": slopes,
        "failures": failures,
    })
}

/// CSV with a header row; every cell already formatted.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Columns `level, h, <error names>`.
pub fn convergence_csv(r: &ConvergenceReport) -> String {
    let names = r.error_names();
    let mut header = vec!["level", "h"];
    header.extend(names.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = r
        .levels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let mut row = vec![i.to_string(), fmt_float(l.h)];
            row.extend(names.iter().map(|k| l.error(k).map(fmt_float).unwrap_or_default()));
            row
        })
        .collect();
    csv(&header, &rows)
}

/// Columns `h, err_u_l2, err_u_h1, err_p_l2`.
pub fn stokes_errors_csv(rows: &[(f64, [f64; 3])]) -> String {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(h, e)| std::iter::once(*h).chain(e.iter().copied()).map(fmt_float).collect())
        .collect();
    csv(&["h", "err_u_l2", "err_u_h1", "err_p_l2"], &rows)
}

/// Columns `index, sigma`.
pub fn spectrum_csv(sigma: &[f64]) -> String {
    let rows: Vec<Vec<String>> = sigma.iter().enumerate().map(|(i, &s)| vec![i.to_string(), fmt_float(s)]).collect();
    csv(&["index", "sigma"], &rows)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Scalar(String, Vec<f64>),
    Vector(String, Vec<[f64; 2]>),
}

impl Field {
    fn name(&self) -> &str {
        match self {
            Field::Scalar(n, _) | Field::Vector(n, _) => n,
        }
    }

    fn len(&self) -> usize {
        match self {
            Field::Scalar(_, v) => v.len(),
            Field::Vector(_, v) => v.len(),
        }
    }
}

/// Legacy ASCII VTK unstructured grid of triangles (cell type 5).
pub fn vtk(mesh: &Mesh<f64>, title: &str, point_data: &[Field], cell_data: &[Field]) -> crate::Result<String> {
    for f in point_data {
        if f.len() != mesh.n_nodes() {
            return Err(crate::Error::DimensionMismatch(format!(
                "point field '{}' has {} values for {} points",
                f.name(),
                f.len(),
                mesh.n_nodes()
            )));
        }
    }
    for f in cell_data {
        if f.len() != mesh.n_triangles() {
            return Err(crate::Error::DimensionMismatch(format!(
                "cell field '{}' has {} values for {} cells",
                f.name(),
                f.len(),
                mesh.n_triangles()
            )));
        }
    }
    let mut s = String::new();
    let title = title.replace('\n', " ");
    writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {} double", mesh.n_nodes()).unwrap();
    for p in mesh.nodes() {
        writeln!(s, "{} {} 0", fmt_float(p[0]), fmt_float(p[1])).unwrap();
    }
    let nt = mesh.n_triangles();
    writeln!(s, "CELLS {nt} {}", 4 * nt).unwrap();
    for t in mesh.triangles() {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {nt}").unwrap();
    for _ in 0..nt {
        s.push_str("5\n");
    }
    write_fields(&mut s, "POINT_DATA", mesh.n_nodes(), point_data);
    write_fields(&mut s, "CELL_DATA", nt, cell_data);
    Ok(s)
}

fn write_fields(s: &mut String, section: &str, count: usize, fields: &[Field]) {
    if fields.is_empty() {
        return;
    }
    writeln!(s, "{section} {count}").unwrap();
    for f in fields {
        let name = f.name().replace(char::is_whitespace, "_");
        match f {
            Field::Scalar(_, v) => {
                writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
                for x in v {
                    writeln!(s, "{}", fmt_float(*x)).unwrap();
                }
            }
            Field::Vector(_, v) => {
                writeln!(s, "VECTORS {name} double").unwrap();
                for x in v {
                    writeln!(s, "{} {} 0", fmt_float(x[0]), fmt_float(x[1])).unwrap();
                }
            }
        }
    }
}

/// Values of component `c` at the mesh vertices.
pub fn vertex_values(space: &FeSpace<'_, f64>, coeffs: &[f64], c: usize) -> Vec<f64> {
    let mesh = space.mesh();
    let mut out = vec![0.0; mesh.n_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for (i, &v) in tri.iter().enumerate() {
            let mut bary = [0.0; 3];
            bary[i] = 1.0;
            out[v] = space.eval(coeffs, c, t, &bary);
        }
    }
    out
}

/// Values at triangle centroids.
pub fn cell_values(space: &FeSpace<'_, f64>, coeffs: &[f64]) -> Vec<f64> {
    let third = 1.0 / 3.0;
    (0..space.mesh().n_triangles()).map(|t| space.eval(coeffs, 0, t, &[third; 3])).collect()
}

/// Velocity at vertices plus pressure at vertices (continuous) or cells
/// (discontinuous).
pub fn flow_fields(velocity: &FeSpace<'_, f64>, u: &[f64], pressure: &FeSpace<'_, f64>, p: &[f64]) -> (Vec<Field>, Vec<Field>) {
    let ux = vertex_values(velocity, u, 0);
    let uy = vertex_values(velocity, u, 1);
    let points = vec![Field::Vector("velocity".into(), ux.into_iter().zip(uy).map(|(a, b)| [a, b]).collect())];
    if pressure.kind().is_continuous() {
        let mut points = points;
        points.push(Field::Scalar("pressure".into(), vertex_values(pressure, p, 0)));
        (points, Vec::new())
    } else {
        (points, vec![Field::Scalar("pressure".into(), cell_values(pressure, p))])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::ElementKind;

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(f64::NAN), "NaN");
        let v = json!({"a": num(1.0 / 3.0), "b": [num(2.0)], "c": num(f64::INFINITY), "d": 3});
        let s = to_json_string(&v);
        assert!(s.contains("\"a\": 3.3333333333333331e-1"), "{s}");
        assert!(s.contains("2.0000000000000000e0"));
        assert!(s.contains("\"c\": null"));
        assert!(s.contains("\"d\": 3"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn envelope_keys() {
        let v = envelope(json!({"n": 4}), json!([]), "ok");
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["config", "results", "status", "version"]);
    }

    #[test]
    fn csv_headers() {
        let s = stokes_errors_csv(&[(0.0625, [1.0, 2.0, 3.0])]);
        assert_eq!(s.lines().next().unwrap(), "h,err_u_l2,err_u_h1,err_p_l2");
        assert_eq!(s.lines().count(), 2);
        assert_eq!(spectrum_csv(&[2.0, 1.0]).lines().collect::<Vec<_>>()[0], "index,sigma");
    }

    #[test]
    fn vtk_layout() {
        let mesh = Mesh::<f64>::unit_square(2).unwrap();
        let p0 = FeSpace::scalar(&mesh, ElementKind::P0);
        let v = FeSpace::vector(&mesh, ElementKind::P2);
        let u = v.interpolate_vector(|x| [x[0], -x[1]]);
        let p: Vec<f64> = (0..p0.n_dofs()).map(|i| i as f64).collect();
        let (pts, cells) = flow_fields(&v, &u, &p0, &p);
        let s = vtk(&mesh, "test", &pts, &cells).unwrap();
        assert!(s.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(s.contains("DATASET UNSTRUCTURED_GRID"));
        assert!(s.contains("POINTS 9 double"));
        assert!(s.contains("CELLS 8 32"));
        assert!(s.contains("CELL_TYPES 8"));
        assert!(s.contains("POINT_DATA 9\nVECTORS velocity double"));
        assert!(s.contains("CELL_DATA 8\nSCALARS pressure double 1"));
        // vertex values reproduce the interpolated field
        let ux = vertex_values(&v, &u, 0);
        for (k, x) in mesh.nodes().iter().enumerate() {
            assert!((ux[k] - x[0]).abs() < 1e-14);
        }
        let bad = vtk(&mesh, "t", &[Field::Scalar("p".into(), vec![0.0; 3])], &[]);
        assert!(bad.is_err());
    }
}
