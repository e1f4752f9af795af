//! Heterogeneous coefficients and source data on a [`Mesh`].
//!
//! Coefficients are piecewise constant per element. Velocity models map to
//! `nu = c^-2` with `mu = 1`.

use std::path::Path;

use crate::error::{config, Error, Result};
use crate::linalg::{C64, ZERO};
use crate::mesh::{Bounds, Mesh};

/// Regularised point source `f(x) = a exp(-|x - x0|^2 / (2 w^2)) / (2 pi w^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSource {
    pub center: [f64; 2],
    pub width: f64,
    pub amplitude: C64,
}

impl GaussianSource {
    /// Unit source just below the top edge of `bounds`.
    pub fn near_surface(bounds: &Bounds) -> Self {
        GaussianSource {
            center: [0.5 * (bounds.xmin + bounds.xmax), bounds.ymax - 0.1 * bounds.height()],
            width: 0.02 * bounds.width().min(bounds.height()),
            amplitude: C64::new(1.0, 0.0),
        }
    }

    pub fn eval(&self, p: [f64; 2]) -> C64 {
        let w2 = self.width * self.width;
        let r2 = (p[0] - self.center[0]).powi(2) + (p[1] - self.center[1]).powi(2);
        self.amplitude * ((-r2 / (2.0 * w2)).exp() / (2.0 * std::f64::consts::PI * w2))
    }
}

#[derive(Debug, Clone)]
pub struct MediumField {
    /// Per-element diffusion coefficient.
    pub mu: Vec<f64>,
    /// Per-element mass coefficient, `c^-2`.
    pub nu: Vec<f64>,
    pub source: GaussianSource,
    /// Boundary datum, one constant per entry of `Mesh::boundary_edges`.
    pub g: Vec<C64>,
}

impl MediumField {
    /// Builds a field from a per-element velocity.
    pub fn from_velocity(mesh: &Mesh, velocity: impl Fn(usize) -> f64) -> Result<Self> {
        let nu = (0..mesh.num_elements())
            .map(|e| {
                let c = velocity(e);
                if c > 0.0 && c.is_finite() {
                    Ok(1.0 / (c * c))
                } else {
                    config(format!("non-positive velocity {c} on element {e}"))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MediumField {
            mu: vec![1.0; mesh.num_elements()],
            nu,
            source: GaussianSource::near_surface(&mesh.bounds),
            g: vec![ZERO; mesh.boundary_edges.len()],
        })
    }

    pub fn with_source(mut self, source: GaussianSource) -> Self {
        self.source = source;
        self
    }

    pub fn with_boundary_datum(mut self, g: C64) -> Self {
        self.g.iter_mut().for_each(|v| *v = g);
        self
    }

    /// Checks positivity and sizes against `mesh`.
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if self.mu.len() != mesh.num_elements() || self.nu.len() != mesh.num_elements() {
            return config("medium does not match mesh element count");
        }
        if self.g.len() != mesh.boundary_edges.len() {
            return config("boundary datum does not match mesh boundary");
        }
        if self.mu.iter().chain(&self.nu).any(|&v| !(v > 0.0 && v.is_finite())) {
            return config("coefficients must be positive and finite");
        }
        if !(self.source.width > 0.0) {
            return config("source width must be positive");
        }
        Ok(())
    }
}

/// Synthetic velocity models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BuiltinMedium {
    Constant,
    /// Horizontal bands; velocity grows linearly from 1 at the top band to
    /// `contrast` at the bottom band.
    Layers { bands: usize, contrast: f64 },
    /// Two regions split by the rectangle diagonal from lower-left to
    /// upper-right; velocity 1 above, `contrast` below.
    Wedge { contrast: f64 },
}

impl BuiltinMedium {
    pub fn from_name(name: &str, bands: usize, contrast: f64) -> Result<Self> {
        let m = match name {
            "constant" => BuiltinMedium::Constant,
            "layers" => BuiltinMedium::Layers { bands, contrast },
            "wedge" => BuiltinMedium::Wedge { contrast },
            other => return config(format!("unknown builtin medium '{other}'")),
        };
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        match *self {
            BuiltinMedium::Layers { bands, contrast } if bands == 0 || !(contrast > 0.0) => {
                config("layers need at least one band and a positive contrast")
            }
            BuiltinMedium::Wedge { contrast } if !(contrast > 0.0) => config("wedge contrast must be positive"),
            _ => Ok(()),
        }
    }

    pub fn velocity_at(&self, bounds: &Bounds, p: [f64; 2]) -> f64 {
        match *self {
            BuiltinMedium::Constant => 1.0,
            BuiltinMedium::Layers { bands, contrast } => {
                let depth = (bounds.ymax - p[1]) / bounds.height();
                let k = ((depth * bands as f64).floor() as usize).min(bands - 1);
                if bands == 1 {
                    1.0
                } else {
                    1.0 + (contrast - 1.0) * k as f64 / (bands - 1) as f64
                }
            }
            BuiltinMedium::Wedge { contrast } => {
                let s = (p[0] - bounds.xmin) / bounds.width() - (p[1] - bounds.ymin) / bounds.height();
                if s > 0.0 {
                    contrast
                } else {
                    1.0
                }
            }
        }
    }
}

pub fn builtin_medium(spec: BuiltinMedium, mesh: &Mesh) -> Result<MediumField> {
    spec.check()?;
    MediumField::from_velocity(mesh, |e| spec.velocity_at(&mesh.bounds, mesh.barycenter(e)))
}

/// Velocity raster in the `MEDIUM 1` text format.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub nx: usize,
    pub ny: usize,
    pub bounds: Bounds,
    /// Row-major, `y` outer.
    pub values: Vec<f64>,
}

impl Raster {
    /// Nearest-cell lookup.
    pub fn sample(&self, p: [f64; 2]) -> f64 {
        let fx = (p[0] - self.bounds.xmin) / self.bounds.width() * self.nx as f64;
        let fy = (p[1] - self.bounds.ymin) / self.bounds.height() * self.ny as f64;
        let i = (fx.floor().max(0.0) as usize).min(self.nx - 1);
        let j = (fy.floor().max(0.0) as usize).min(self.ny - 1);
        self.values[j * self.nx + i]
    }

    pub fn parse(text: &str) -> Result<Raster> {
        let ingest = |line: usize, msg: String| Error::Ingest { line, msg };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

        let (ln, magic) = lines.next().ok_or_else(|| ingest(1, "empty file".into()))?;
        if magic.split_whitespace().collect::<Vec<_>>() != ["MEDIUM", "1"] {
            return Err(ingest(ln, format!("expected header 'MEDIUM 1', found '{}'", magic.trim())));
        }
        let (ln, dims) = lines.next().ok_or_else(|| ingest(2, "missing grid line".into()))?;
        let fields: Vec<&str> = dims.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(ingest(ln, format!("expected 'nx ny xmin xmax ymin ymax', found {} fields", fields.len())));
        }
        let nx: usize = fields[0].parse().map_err(|_| ingest(ln, format!("bad nx '{}'", fields[0])))?;
        let ny: usize = fields[1].parse().map_err(|_| ingest(ln, format!("bad ny '{}'", fields[1])))?;
        let mut b = [0.0; 4];
        for (k, f) in fields[2..].iter().enumerate() {
            b[k] = f.parse().map_err(|_| ingest(ln, format!("bad bound '{f}'")))?;
        }
        let bounds = Bounds::new(b[0], b[1], b[2], b[3]);
        if nx == 0 || ny == 0 || !(bounds.xmax > bounds.xmin && bounds.ymax > bounds.ymin) {
            return Err(ingest(ln, "degenerate raster grid".into()));
        }

        let mut values = Vec::with_capacity(nx * ny);
        let mut last_line = ln;
        for (ln, line) in lines {
            last_line = ln;
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| ingest(ln, format!("bad velocity '{tok}'")))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(ingest(ln, format!("velocity must be positive, found {v}")));
                }
                if values.len() == nx * ny {
                    return Err(ingest(ln, format!("more than nx*ny = {} values", nx * ny)));
                }
                values.push(v);
            }
        }
        if values.len() != nx * ny {
            return Err(ingest(last_line, format!("expected {} values, found {}", nx * ny, values.len())));
        }
        Ok(Raster { nx, ny, bounds, values })
    }

    pub fn to_text(&self) -> String {
        let b = &self.bounds;
        let mut s = format!("MEDIUM 1\n{} {} {} {} {} {}\n", self.nx, self.ny, b.xmin, b.xmax, b.ymin, b.ymax);
        for row in self.values.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Samples a raster at element barycentres: `nu = c^-2`, `mu = 1`.
pub fn medium_from_raster(raster: &Raster, mesh: &Mesh) -> Result<MediumField> {
    let eps = 1e-12 * mesh.bounds.width().max(mesh.bounds.height());
    let padded = Bounds::new(raster.bounds.xmin - eps, raster.bounds.xmax + eps, raster.bounds.ymin - eps, raster.bounds.ymax + eps);
    if !padded.contains(&mesh.bounds) {
        return config(format!("raster {:?} does not cover mesh {:?}", raster.bounds, mesh.bounds));
    }
    MediumField::from_velocity(mesh, |e| raster.sample(mesh.barycenter(e)))
}

pub fn load_medium(path: impl AsRef<Path>, mesh: &Mesh) -> Result<MediumField> {
    let text = std::fs::read_to_string(path)?;
    medium_from_raster(&Raster::parse(&text)?, mesh)
}
