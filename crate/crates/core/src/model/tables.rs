use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

const STEVENS_LEWIS_JSON: &str = include_str!("../../data/stevens_lewis.json");

/// Aerodynamic coefficient selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Coefficient {
    Cx,
    Cz,
    Cm,
    Cxq,
    Czq,
    Cmq,
}

impl Coefficient {
    pub const ALL: [Coefficient; 6] = [Self::Cx, Self::Cz, Self::Cm, Self::Cxq, Self::Czq, Self::Cmq];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cx => "CX",
            Self::Cz => "CZ",
            Self::Cm => "Cm",
            Self::Cxq => "CXq",
            Self::Czq => "CZq",
            Self::Cmq => "Cmq",
        }
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Coefficient {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownCoefficient(s.to_string()))
    }
}

/// On-disk form of the aero tables. 2-D grids are row-major with rows
/// indexed by alpha and columns by elevator deflection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AeroTableFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub alpha_breakpoints_deg: Vec<f64>,
    pub deltae_breakpoints_deg: Vec<f64>,
    #[serde(rename = "CX")]
    pub cx: Vec<Vec<f64>>,
    #[serde(rename = "CZ")]
    pub cz: Vec<Vec<f64>>,
    #[serde(rename = "Cm")]
    pub cm: Vec<Vec<f64>>,
    #[serde(rename = "CXq")]
    pub cxq: Vec<f64>,
    #[serde(rename = "CZq")]
    pub czq: Vec<f64>,
    #[serde(rename = "Cmq")]
    pub cmq: Vec<f64>,
}

/// Validated look-up tables with multilinear interpolation.
///
/// Queries outside the breakpoint range clamp to the nearest edge.
#[derive(Clone, Debug, PartialEq)]
pub struct AeroTables<T> {
    version: Option<String>,
    alpha_deg: Vec<T>,
    deltae_deg: Vec<T>,
    cx: Vec<T>,
    cz: Vec<T>,
    cm: Vec<T>,
    cxq: Vec<T>,
    czq: Vec<T>,
    cmq: Vec<T>,
}

fn check_breakpoints(name: &str, bp: &[f64]) -> Result<()> {
    if bp.is_empty() {
        return Err(Error::Tables(format!("{name} has no breakpoints")));
    }
    if bp.iter().any(|v| !v.is_finite()) {
        return Err(Error::Tables(format!("{name} has non-finite breakpoints")));
    }
    if bp.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Tables(format!("{name} breakpoints are not strictly increasing")));
    }
    Ok(())
}

fn flatten_grid<T: Real>(name: &str, grid: &[Vec<f64>], rows: usize, cols: usize) -> Result<Vec<T>> {
    if grid.len() != rows {
        return Err(Error::Tables(format!(
            "{name} has {} rows, expected {rows}",
            grid.len()
        )));
    }
    let mut out = Vec::with_capacity(rows * cols);
    for (i, row) in grid.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Tables(format!(
                "{name} row {i} has {} columns, expected {cols}",
                row.len()
            )));
        }
        for &v in row {
            if !v.is_finite() {
                return Err(Error::Tables(format!("{name} row {i} has a non-finite value")));
            }
            out.push(T::lit(v));
        }
    }
    Ok(out)
}

fn convert_line<T: Real>(name: &str, line: &[f64], len: usize) -> Result<Vec<T>> {
    if line.len() != len {
        return Err(Error::Tables(format!(
            "{name} has {} entries, expected {len}",
            line.len()
        )));
    }
    if line.iter().any(|v| !v.is_finite()) {
        return Err(Error::Tables(format!("{name} has a non-finite value")));
    }
    Ok(line.iter().map(|&v| T::lit(v)).collect())
}

/// Lower cell index and fraction for `x` on `bp`, clamped to the range.
fn locate<T: Real>(bp: &[T], x: T) -> (usize, T) {
    let n = bp.len();
    if n == 1 {
        return (0, T::zero());
    }
    let x = x.max(bp[0]).min(bp[n - 1]);
    let i = bp.partition_point(|&b| b <= x).saturating_sub(1).min(n - 2);
    (i, (x - bp[i]) / (bp[i + 1] - bp[i]))
}

impl<T: Real> AeroTables<T> {
    pub fn from_file(file: &AeroTableFile) -> Result<Self> {
        check_breakpoints("alpha_breakpoints_deg", &file.alpha_breakpoints_deg)?;
        check_breakpoints("deltae_breakpoints_deg", &file.deltae_breakpoints_deg)?;
        let na = file.alpha_breakpoints_deg.len();
        let ne = file.deltae_breakpoints_deg.len();
        Ok(Self {
            version: file.version.clone(),
            alpha_deg: file.alpha_breakpoints_deg.iter().map(|&v| T::lit(v)).collect(),
            deltae_deg: file.deltae_breakpoints_deg.iter().map(|&v| T::lit(v)).collect(),
            cx: flatten_grid("CX", &file.cx, na, ne)?,
            cz: flatten_grid("CZ", &file.cz, na, ne)?,
            cm: flatten_grid("Cm", &file.cm, na, ne)?,
            cxq: convert_line("CXq", &file.cxq, na)?,
            czq: convert_line("CZq", &file.czq, na)?,
            cmq: convert_line("Cmq", &file.cmq, na)?,
        })
    }

    /// Public-domain Stevens–Lewis F-16 longitudinal data shipped with the crate.
    pub fn stevens_lewis() -> Self {
        let file: AeroTableFile = serde_json::from_str(STEVENS_LEWIS_JSON).expect("bundled tables parse");
        Self::from_file(&file).expect("bundled tables are well formed")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: AeroTableFile = serde_json::from_reader(std::fs::File::open(path)?)?;
        Self::from_file(&file)
    }

    pub fn version(&self) -> Option<&str> {
        self.version.as_deref()
    }

    pub fn alpha_breakpoints_deg(&self) -> &[T] {
        &self.alpha_deg
    }

    pub fn deltae_breakpoints_deg(&self) -> &[T] {
        &self.deltae_deg
    }

    pub fn to_file(&self) -> AeroTableFile {
        let ne = self.deltae_deg.len();
        let grid = |g: &[T]| g.chunks(ne).map(|r| r.iter().map(|v| v.as_f64()).collect()).collect();
        let line = |l: &[T]| l.iter().map(|v| v.as_f64()).collect();
        AeroTableFile {
            version: self.version.clone(),
            description: None,
            alpha_breakpoints_deg: line(&self.alpha_deg),
            deltae_breakpoints_deg: line(&self.deltae_deg),
            cx: grid(&self.cx),
            cz: grid(&self.cz),
            cm: grid(&self.cm),
            cxq: line(&self.cxq),
            czq: line(&self.czq),
            cmq: line(&self.cmq),
        }
    }

    fn bilinear(&self, grid: &[T], alpha_deg: T, deltae_deg: T) -> T {
        let ne = self.deltae_deg.len();
        let (i, ta) = locate(&self.alpha_deg, alpha_deg);
        let (j, te) = locate(&self.deltae_deg, deltae_deg);
        let i1 = (i + 1).min(self.alpha_deg.len() - 1);
        let j1 = (j + 1).min(ne - 1);
        let g = |r: usize, c: usize| grid[r * ne + c];
        let lo = g(i, j) * (T::one() - te) + g(i, j1) * te;
        let hi = g(i1, j) * (T::one() - te) + g(i1, j1) * te;
        lo * (T::one() - ta) + hi * ta
    }

    fn linear(&self, line: &[T], alpha_deg: T) -> T {
        let (i, t) = locate(&self.alpha_deg, alpha_deg);
        let i1 = (i + 1).min(line.len() - 1);
        line[i] * (T::one() - t) + line[i1] * t
    }

    /// Interpolated coefficient at `alpha`, `delta_e` (radians). 1-D tables ignore `delta_e`.
    pub fn lookup(&self, which: Coefficient, alpha: T, delta_e: T) -> T {
        let a = alpha.to_degrees();
        let e = delta_e.to_degrees();
        match which {
            Coefficient::Cx => self.bilinear(&self.cx, a, e),
            Coefficient::Cz => self.bilinear(&self.cz, a, e),
            Coefficient::Cm => self.bilinear(&self.cm, a, e),
            Coefficient::Cxq => self.linear(&self.cxq, a),
            Coefficient::Czq => self.linear(&self.czq, a),
            Coefficient::Cmq => self.linear(&self.cmq, a),
        }
    }

    /// Look up by textual coefficient name (`CX`, `CZ`, `Cm`, `CXq`, `CZq`, `Cmq`).
    pub fn lookup_named(&self, which: &str, alpha: T, delta_e: T) -> Result<T> {
        Ok(self.lookup(which.parse()?, alpha, delta_e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> AeroTableFile {
        AeroTableFile {
            version: None,
            description: None,
            alpha_breakpoints_deg: vec![0.0, 10.0, 20.0],
            deltae_breakpoints_deg: vec![-10.0, 10.0],
            cx: vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]],
            cz: vec![vec![0.0; 2]; 3],
            cm: vec![vec![0.0; 2]; 3],
            cxq: vec![0.0, 1.0, 4.0],
            czq: vec![0.0; 3],
            cmq: vec![0.0; 3],
        }
    }

    fn rad(d: f64) -> f64 {
        d.to_radians()
    }

    #[test]
    fn breakpoint_returns_stored_value() {
        let t = AeroTables::<f64>::stevens_lewis();
        // CX(alpha = 10, de = 0) and Cm(alpha = 45, de = 24) straight from the grids.
        assert_eq!(t.lookup(Coefficient::Cx, rad(10.0), 0.0), 0.032);
        assert_eq!(t.lookup(Coefficient::Cm, rad(45.0), rad(24.0)), -0.005);
        assert_eq!(t.lookup(Coefficient::Cmq, rad(-5.0), 0.0), -0.54);
    }

    #[test]
    fn midpoint_is_mean_of_neighbours() {
        let t = AeroTables::<f64>::from_file(&small()).unwrap();
        assert!((t.lookup(Coefficient::Cxq, rad(15.0), 0.0) - 2.5).abs() < 1e-12);
        assert!((t.lookup(Coefficient::Cx, rad(5.0), 0.0) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn clamps_outside_envelope() {
        let t = AeroTables::<f64>::from_file(&small()).unwrap();
        assert_eq!(t.lookup(Coefficient::Cxq, rad(90.0), 0.0), 4.0);
        assert_eq!(t.lookup(Coefficient::Cx, rad(-30.0), rad(-40.0)), 1.0);
        assert_eq!(t.lookup(Coefficient::Cx, rad(35.0), rad(25.0)), 6.0);
    }

    #[test]
    fn unknown_coefficient_is_an_error() {
        let t = AeroTables::<f64>::stevens_lewis();
        assert!(matches!(
            t.lookup_named("Cl", 0.0, 0.0),
            Err(Error::UnknownCoefficient(_))
        ));
        assert_eq!(
            t.lookup_named("cmq", 0.0, 0.0).unwrap(),
            t.lookup(Coefficient::Cmq, 0.0, 0.0)
        );
    }

    #[test]
    fn single_column_grid_is_alpha_only() {
        let mut f = small();
        f.deltae_breakpoints_deg = vec![0.0];
        f.cx = vec![vec![1.0], vec![2.0], vec![3.0]];
        f.cz = vec![vec![0.0]; 3];
        f.cm = vec![vec![0.0]; 3];
        let t = AeroTables::<f64>::from_file(&f).unwrap();
        assert_eq!(t.lookup(Coefficient::Cx, rad(10.0), rad(20.0)), 2.0);
        assert_eq!(t.lookup(Coefficient::Cx, rad(10.0), rad(-20.0)), 2.0);
    }

    #[test]
    fn rejects_malformed_tables() {
        let mut f = small();
        f.alpha_breakpoints_deg = vec![0.0, 0.0, 1.0];
        assert!(AeroTables::<f64>::from_file(&f).is_err());
        let mut f = small();
        f.cx.pop();
        assert!(AeroTables::<f64>::from_file(&f).is_err());
        let mut f = small();
        f.cmq.push(1.0);
        assert!(AeroTables::<f64>::from_file(&f).is_err());
        let mut f = small();
        f.cz[1][0] = f64::NAN;
        assert!(AeroTables::<f64>::from_file(&f).is_err());
    }

    #[test]
    fn bundled_tables_cover_scheduling_box() {
        let t = AeroTables::<f64>::stevens_lewis();
        let a = t.alpha_breakpoints_deg();
        assert_eq!((a[0], a[a.len() - 1]), (-10.0, 45.0));
        assert_eq!(t.deltae_breakpoints_deg().len(), 5);
        let f = t.to_file();
        assert_eq!(AeroTables::<f64>::from_file(&f).unwrap(), t);
    }

    #[test]
    fn f32_tables_agree_with_f64() {
        let t64 = AeroTables::<f64>::stevens_lewis();
        let t32 = AeroTables::<f32>::stevens_lewis();
        for c in Coefficient::ALL {
            let a = t64.lookup(c, 0.2, -0.05);
            let b = t32.lookup(c, 0.2, -0.05) as f64;
            assert!((a - b).abs() < 1e-5, "{c}: {a} vs {b}");
        }
    }
}
