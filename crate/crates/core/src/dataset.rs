//! Data model: a response vector, a covariate matrix with a control (Z) /
//! tested (W) column partition, seeded sample splits and the W-permutation
//! used for split-ratio calibration.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Sub-matrix with the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            let r = self.row(i);
            data.extend(cols.iter().map(|&j| r[j]));
        }
        Matrix { rows: rows.len(), cols: cols.len(), data }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: rows.len(), cols: self.cols, data }
    }

    pub fn select_cols(&self, cols: &[usize]) -> Matrix {
        let all: Vec<usize> = (0..self.rows).collect();
        self.select(&all, cols)
    }
}

/// Column roles for CSV ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleSpec {
    pub response: String,
    #[serde(default)]
    pub z: Vec<String>,
    pub w: Vec<String>,
}

/// Response `y` plus covariates `x` whose columns are partitioned into a
/// control block Z and a tested block W.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    x: Matrix,
    z_cols: Vec<usize>,
    w_cols: Vec<usize>,
    response_name: String,
    names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking that `z_cols`/`w_cols` partition the
    /// columns of `x` and that every value is finite.
    pub fn new(y: Vec<f64>, x: Matrix, z_cols: Vec<usize>, w_cols: Vec<usize>) -> Result<Self> {
        let names = default_names(x.cols(), &z_cols, &w_cols);
        Self::with_names(y, x, z_cols, w_cols, "y".to_string(), names)
    }

    pub fn with_names(
        y: Vec<f64>,
        x: Matrix,
        z_cols: Vec<usize>,
        w_cols: Vec<usize>,
        response_name: String,
        names: Vec<String>,
    ) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::TooFewRows { needed: 1, got: 0 });
        }
        if y.len() != x.rows() {
            return Err(Error::DimensionMismatch { expected: y.len(), got: x.rows() });
        }
        if names.len() != x.cols() {
            return Err(Error::DimensionMismatch { expected: x.cols(), got: names.len() });
        }
        let p = x.cols();
        let mut seen = vec![false; p];
        for &c in z_cols.iter().chain(&w_cols) {
            if c >= p {
                return Err(Error::invalid(format!("column index {c} out of range (p = {p})")));
            }
            if seen[c] {
                return Err(Error::invalid(format!("column index {c} assigned twice")));
            }
            seen[c] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("Z and W columns must cover every covariate"));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i + 1, column: response_name });
        }
        if let Some(k) = x.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: k / p + 1, column: names[k % p].clone() });
        }
        Ok(Self { y, x, z_cols, w_cols, response_name, names })
    }

    /// Dataset whose first `p1` columns are Z and the remaining ones W.
    pub fn from_blocks(y: Vec<f64>, x: Matrix, p1: usize) -> Result<Self> {
        if p1 > x.cols() {
            return Err(Error::invalid(format!("p1 = {p1} exceeds p = {}", x.cols())));
        }
        let z = (0..p1).collect();
        let w = (p1..x.cols()).collect();
        Self::new(y, x, z, w)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn p1(&self) -> usize {
        self.z_cols.len()
    }

    pub fn p2(&self) -> usize {
        self.w_cols.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn z_cols(&self) -> &[usize] {
        &self.z_cols
    }

    pub fn w_cols(&self) -> &[usize] {
        &self.w_cols
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Column order of the full feature vector X = (Z, W).
    pub fn x_cols(&self) -> Vec<usize> {
        self.z_cols.iter().chain(&self.w_cols).copied().collect()
    }

    pub fn y_at(&self, rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&i| self.y[i]).collect()
    }

    /// Z features of the given rows.
    pub fn z_rows(&self, rows: &[usize]) -> Matrix {
        self.x.select(rows, &self.z_cols)
    }

    /// Full X = (Z, W) features of the given rows.
    pub fn x_rows(&self, rows: &[usize]) -> Matrix {
        self.x.select(rows, &self.x_cols())
    }

    /// Copy with every covariate column centred and scaled to unit
    /// (population) standard deviation; constant columns are only centred.
    pub fn standardized(&self) -> Dataset {
        let n = self.n() as f64;
        let mut x = self.x.clone();
        for j in 0..x.cols() {
            let col = x.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            let scale = if sd > 0.0 { sd } else { 1.0 };
            for (i, v) in col.iter().enumerate() {
                x.set(i, j, (v - mean) / scale);
            }
        }
        Dataset { x, ..self.clone() }
    }

    /// Writes the dataset as CSV: response first, then covariates in stored
    /// column order. Values use the shortest round-trip representation.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec![self.response_name.clone()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![self.y[i].to_string()];
            rec.extend(self.x.row(i).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Ok(())
    }
}

fn default_names(p: usize, z_cols: &[usize], w_cols: &[usize]) -> Vec<String> {
    let mut names: Vec<String> = (0..p).map(|j| format!("x{}", j + 1)).collect();
    for (k, &c) in z_cols.iter().enumerate() {
        if c < p {
            names[c] = format!("z{}", k + 1);
        }
    }
    for (k, &c) in w_cols.iter().enumerate() {
        if c < p {
            names[c] = format!("w{}", k + 1);
        }
    }
    names
}

/// Reads a CSV with a header row. Columns are reordered to (Z block, W block);
/// columns not named in `roles` are ignored.
pub fn load_csv(path: impl AsRef<Path>, roles: &RoleSpec) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        });
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(Error::DuplicateColumn(h.clone()));
        }
    }
    if roles.w.is_empty() {
        return Err(Error::invalid("at least one W column is required"));
    }
    let mut used = HashSet::new();
    for name in std::iter::once(&roles.response).chain(&roles.z).chain(&roles.w) {
        if !used.insert(name.as_str()) {
            return Err(Error::DuplicateColumn(name.clone()));
        }
    }
    let position =
        |name: &String| header.iter().position(|h| h == name).ok_or_else(|| Error::UnknownColumn(name.clone()));
    let y_pos = position(&roles.response)?;
    let x_pos: Vec<usize> = roles.z.iter().chain(&roles.w).map(position).collect::<Result<_>>()?;

    let mut y = Vec::new();
    let mut x = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let cell = |pos: usize| -> Result<f64> {
            let raw = record.get(pos).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| Error::ParseCell {
                row,
                column: header[pos].clone(),
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row, column: header[pos].clone() });
            }
            Ok(v)
        };
        y.push(cell(y_pos)?);
        for &pos in &x_pos {
            x.push(cell(pos)?);
        }
    }
    if y.len() < 4 {
        return Err(Error::TooFewRows { needed: 4, got: y.len() });
    }
    let p1 = roles.z.len();
    let p = x_pos.len();
    let names = roles.z.iter().chain(&roles.w).cloned().collect();
    Dataset::with_names(
        y.clone(),
        Matrix::new(y.len(), p, x)?,
        (0..p1).collect(),
        (p1..p).collect(),
        roles.response.clone(),
        names,
    )
}

/// Seeded partition of `0..N` into a fitting half D1 and an evaluation half D2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub d1_idx: Vec<usize>,
    pub d2_idx: Vec<usize>,
    /// Realized n1 / N.
    pub xi: f64,
    pub seed: u64,
}

impl SplitPlan {
    pub fn n1(&self) -> usize {
        self.d1_idx.len()
    }

    pub fn n2(&self) -> usize {
        self.d2_idx.len()
    }

    /// Same partition with the roles of the two halves exchanged.
    pub fn swapped(&self) -> SplitPlan {
        let n = (self.n1() + self.n2()) as f64;
        SplitPlan {
            d1_idx: self.d2_idx.clone(),
            d2_idx: self.d1_idx.clone(),
            xi: self.n2() as f64 / n,
            seed: self.seed,
        }
    }
}

/// Number of D1 rows for ratio `xi`: floor(xi * N). The small slack absorbs
/// representation error such as 0.7 * 10 = 6.999…
pub fn d1_size(n: usize, xi: f64) -> usize {
    (xi * n as f64 + 1e-9).floor() as usize
}

/// Uniformly shuffles `0..N` under `seed` and assigns the first floor(xi N)
/// entries to D1.
pub fn make_split(n: usize, xi: f64, seed: u64) -> Result<SplitPlan> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::invalid(format!("split ratio must lie in (0, 1), got {xi}")));
    }
    make_split_sized(n, d1_size(n, xi), seed)
}

/// Split with an explicit D1 size.
pub fn make_split_sized(n: usize, n1: usize, seed: u64) -> Result<SplitPlan> {
    if n1 == 0 || n1 >= n {
        return Err(Error::DegenerateSplit(format!("N = {n} with |D1| = {n1} leaves an empty half")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::seeded(seed));
    let d2_idx = idx.split_off(n1);
    Ok(SplitPlan { d1_idx: idx, d2_idx, xi: n1 as f64 / n as f64, seed })
}

/// Copy of `data` whose W rows are jointly permuted by one uniform
/// permutation drawn under `seed`. Z and y stay in place.
pub fn permute_w(data: &Dataset, seed: u64) -> Result<Dataset> {
    let mut perm: Vec<usize> = (0..data.n()).collect();
    perm.shuffle(&mut rng::seeded(seed));
    permute_w_with(data, &perm)
}

/// Row `i` of the new W block is row `perm[i]` of the old one.
pub fn permute_w_with(data: &Dataset, perm: &[usize]) -> Result<Dataset> {
    if data.p2() == 0 {
        return Err(Error::invalid("W block is empty"));
    }
    if perm.len() != data.n() {
        return Err(Error::DimensionMismatch { expected: data.n(), got: perm.len() });
    }
    let mut check = perm.to_vec();
    check.sort_unstable();
    if check.iter().enumerate().any(|(i, &v)| i != v) {
        return Err(Error::invalid("not a permutation"));
    }
    let mut x = data.x.clone();
    for (i, &src) in perm.iter().enumerate() {
        for &c in &data.w_cols {
            x.set(i, c, data.x.get(src, c));
        }
    }
    Ok(Dataset { x, ..data.clone() })
}
