use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Pinhole camera looking down +z in camera space.
///
/// `view` is the row-major world-to-camera transform. The principal point is
/// the image center `(width / 2, height / 2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub view: [[f32; 4]; 4],
    pub focal_x: f32,
    pub focal_y: f32,
    pub width: u32,
    pub height: u32,
    pub near: f32,
    pub far: f32,
}

const ORTHO_TOL: f64 = 1e-4;

impl Camera {
    pub fn new(
        view: [[f32; 4]; 4],
        focal_x: f32,
        focal_y: f32,
        width: u32,
        height: u32,
        near: f32,
        far: f32,
    ) -> Result<Self> {
        let cam = Camera {
            view,
            focal_x,
            focal_y,
            width,
            height,
            near,
            far,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Identity view with a focal length equal to the image width.
    pub fn canonical(width: u32, height: u32) -> Self {
        Camera {
            view: IDENTITY,
            focal_x: width as f32,
            focal_y: width as f32,
            width,
            height,
            near: 0.2,
            far: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::InvalidCamera(m));
        if !(self.near > 0.0 && self.near.is_finite() && self.far.is_finite()) {
            return err(format!("near {} must be positive and far {} finite", self.near, self.far));
        }
        if self.near >= self.far {
            return err(format!("near {} must be less than far {}", self.near, self.far));
        }
        if !(self.focal_x > 0.0 && self.focal_y > 0.0 && self.focal_x.is_finite() && self.focal_y.is_finite()) {
            return err("focal lengths must be positive".into());
        }
        if self.width == 0 || self.height == 0 {
            return err("image dimensions must be non-zero".into());
        }
        if self.view.iter().flatten().any(|v| !v.is_finite()) {
            return err("view matrix has non-finite entries".into());
        }
        let dev = self.orthonormality_error();
        if dev > ORTHO_TOL {
            return err(format!("rotation block is not orthonormal (|R^T R - I|_F = {dev:.3e})"));
        }
        if self.view[3] != [0.0, 0.0, 0.0, 1.0] {
            return err(format!("view bottom row must be [0 0 0 1], got {:?}", self.view[3]));
        }
        Ok(())
    }

    /// Frobenius norm of `R^T R - I` for the upper-left 3x3 block.
    pub fn orthonormality_error(&self) -> f64 {
        let r = self.rotation();
        let mut sum = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                let d = dot - if i == j { 1.0 } else { 0.0 };
                sum += d * d;
            }
        }
        sum.sqrt()
    }

    pub fn rotation(&self) -> [[f64; 3]; 3] {
        let v = &self.view;
        std::array::from_fn(|i| std::array::from_fn(|j| v[i][j] as f64))
    }

    pub fn translation(&self) -> [f64; 3] {
        std::array::from_fn(|i| self.view[i][3] as f64)
    }

    pub fn world_to_camera(&self, p: [f32; 3]) -> [f64; 3] {
        let r = self.rotation();
        let t = self.translation();
        std::array::from_fn(|i| r[i][0] * p[0] as f64 + r[i][1] * p[1] as f64 + r[i][2] * p[2] as f64 + t[i])
    }

    /// Camera position in world space, `-R^T t`.
    pub fn center(&self) -> [f64; 3] {
        let r = self.rotation();
        let t = self.translation();
        std::array::from_fn(|j| -(r[0][j] * t[0] + r[1][j] * t[1] + r[2][j] * t[2]))
    }

    pub fn principal_point(&self) -> [f64; 2] {
        [self.width as f64 / 2.0, self.height as f64 / 2.0]
    }
}

const IDENTITY: [[f32; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

const KEYS: [&str; 10] = [
    "view_row0", "view_row1", "view_row2", "view_row3", "focal_x", "focal_y", "width", "height", "near", "far",
];

/// Parses the flat `key=value` camera format. Blank lines and lines starting
/// with `#` are ignored. View rows hold four numbers separated by whitespace
/// or commas.
pub fn parse_camera(text: &str) -> Result<Camera> {
    let mut values: HashMap<&str, (usize, &str)> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::line(i + 1, format!("expected key=value, got `{line}`")));
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::line(i + 1, format!("unknown key `{key}`")));
        }
        if values.insert(key, (i + 1, value.trim())).is_some() {
            return Err(Error::line(i + 1, format!("duplicate key `{key}`")));
        }
    }
    let get = |key: &str| {
        values
            .get(key)
            .copied()
            .ok_or_else(|| Error::InvalidCamera(format!("missing key `{key}`")))
    };
    let float = |key: &str| -> Result<f32> {
        let (line, v) = get(key)?;
        v.parse::<f32>()
            .map_err(|_| Error::line(line, format!("`{key}` is not a number: `{v}`")))
    };
    let int = |key: &str| -> Result<u32> {
        let (line, v) = get(key)?;
        v.parse::<u32>()
            .map_err(|_| Error::line(line, format!("`{key}` is not a non-negative integer: `{v}`")))
    };
    let mut view = [[0.0f32; 4]; 4];
    for (r, row) in view.iter_mut().enumerate() {
        let key = KEYS[r];
        let (line, v) = get(key)?;
        let nums: Vec<&str> = v.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if nums.len() != 4 {
            return Err(Error::line(line, format!("`{key}` needs 4 values, got {}", nums.len())));
        }
        for (dst, s) in row.iter_mut().zip(nums) {
            *dst = s
                .parse()
                .map_err(|_| Error::line(line, format!("`{key}` has a non-numeric entry `{s}`")))?;
        }
    }
    Camera::new(
        view,
        float("focal_x")?,
        float("focal_y")?,
        int("width")?,
        int("height")?,
        float("near")?,
        float("far")?,
    )
}

pub fn load_camera(path: impl AsRef<Path>) -> Result<Camera> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_camera(&text)
}

pub fn camera_to_text(cam: &Camera) -> String {
    let mut s = String::new();
    for (r, row) in cam.view.iter().enumerate() {
        let _ = writeln!(s, "view_row{r}={} {} {} {}", row[0], row[1], row[2], row[3]);
    }
    let _ = writeln!(s, "focal_x={}", cam.focal_x);
    let _ = writeln!(s, "focal_y={}", cam.focal_y);
    let _ = writeln!(s, "width={}", cam.width);
    let _ = writeln!(s, "height={}", cam.height);
    let _ = writeln!(s, "near={}", cam.near);
    let _ = writeln!(s, "far={}", cam.far);
    s
}

pub fn save_camera(cam: &Camera, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, camera_to_text(cam)).map_err(|e| Error::io(path, e))
}
