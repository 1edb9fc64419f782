//! Volume file format shared by cost volumes and distance fields.
//!
//! A volume is a JSON header plus a raw little-endian data file:
//!
//! ```json
//! {"nx": 3, "ny": 3, "ntheta": 4, "hx": 1.0, "hy": 1.0,
//!  "origin_x": 0.0, "origin_y": 0.0,
//!  "dtype": "f32", "order": "x-fastest", "data": "cost.raw"}
//! ```
//!
//! `data` is resolved relative to the header's directory and must hold exactly
//! `nx·ny·ntheta` values, x fastest, then y, then θ. `dtype` is `"f32"` (the
//! default) or `"f64"`; +∞ is written as the IEEE infinity of that width.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CostVolume, DistanceField, GridSpec};

pub const ORDER_X_FASTEST: &str = "x-fastest";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    #[default]
    F32,
    F64,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeHeader {
    pub nx: usize,
    pub ny: usize,
    pub ntheta: usize,
    pub hx: f64,
    pub hy: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    pub dtype: Dtype,
    pub order: String,
    pub data: String,
}

impl VolumeHeader {
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(
            self.nx,
            self.ny,
            self.ntheta,
            self.hx,
            self.hy,
            self.origin_x,
            self.origin_y,
        )
        .map_err(|e| Error::MalformedHeader(e.to_string()))
    }
}

/// Read a header and its raw values.
pub fn load_volume(header_path: &Path) -> Result<(GridSpec, Vec<f64>)> {
    let text = fs::read_to_string(header_path)?;
    let header: VolumeHeader =
        serde_json::from_str(&text).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    if header.order != ORDER_X_FASTEST {
        return Err(Error::MalformedHeader(format!(
            "unsupported order {:?}, expected {ORDER_X_FASTEST:?}",
            header.order
        )));
    }
    let grid = header.grid()?;
    let data_path = resolve(header_path, &header.data);
    let bytes = fs::read(&data_path)?;
    let expected = grid.len() * header.dtype.width();
    if bytes.len() != expected {
        return Err(Error::SizeMismatch {
            expected,
            found: bytes.len(),
        });
    }
    let values = match header.dtype {
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect(),
        Dtype::F64 => bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
            .collect(),
    };
    Ok((grid, values))
}

/// Write a header at `header_path` and the data next to it as `<stem>.raw`.
/// Returns the data file path.
pub fn save_volume(grid: &GridSpec, values: &[f64], header_path: &Path, dtype: Dtype) -> Result<PathBuf> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} values", grid.len()),
            found: values.len().to_string(),
        });
    }
    let stem = header_path
        .file_stem()
        .ok_or_else(|| Error::InvalidParameter(format!("bad header path {}", header_path.display())))?
        .to_string_lossy()
        .into_owned();
    let data_name = format!("{stem}.raw");
    let header = VolumeHeader {
        nx: grid.nx,
        ny: grid.ny,
        ntheta: grid.ntheta,
        hx: grid.hx,
        hy: grid.hy,
        origin_x: grid.origin_x,
        origin_y: grid.origin_y,
        dtype,
        order: ORDER_X_FASTEST.to_string(),
        data: data_name.clone(),
    };
    let mut bytes = Vec::with_capacity(values.len() * dtype.width());
    match dtype {
        Dtype::F32 => values
            .iter()
            .for_each(|&v| bytes.extend_from_slice(&(v as f32).to_le_bytes())),
        Dtype::F64 => values
            .iter()
            .for_each(|&v| bytes.extend_from_slice(&v.to_le_bytes())),
    }
    let data_path = resolve(header_path, &data_name);
    fs::write(&data_path, bytes)?;
    let json = serde_json::to_string_pretty(&header).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    fs::write(header_path, json + "\n")?;
    Ok(data_path)
}

fn resolve(header_path: &Path, data: &str) -> PathBuf {
    match header_path.parent() {
        Some(dir) => dir.join(data),
        None => PathBuf::from(data),
    }
}

/// Load a cost volume; every value must lie in (0, 1].
pub fn load_cost(header_path: &Path) -> Result<CostVolume> {
    let (grid, values) = load_volume(header_path)?;
    CostVolume::from_values(grid, values)
}

pub fn save_cost(cost: &CostVolume, header_path: &Path) -> Result<PathBuf> {
    save_volume(cost.grid(), &cost.to_vec(), header_path, Dtype::F32)
}

pub fn save_field(field: &DistanceField, header_path: &Path, dtype: Dtype) -> Result<PathBuf> {
    save_volume(&field.grid, &field.values, header_path, dtype)
}

pub fn load_field(header_path: &Path) -> Result<DistanceField> {
    let (grid, values) = load_volume(header_path)?;
    if values.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(Error::MalformedHeader(
            "distance field holds negative or NaN values".into(),
        ));
    }
    DistanceField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> GridSpec {
        GridSpec::new(3, 3, 4, 1.0, 1.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn constant_cost_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cost.json");
        let cost = CostVolume::uniform(grid(), 1.0).unwrap();
        save_cost(&cost, &path).unwrap();
        let back = load_cost(&path).unwrap();
        assert_eq!(back.to_vec(), cost.to_vec());
        assert_eq!(back.grid(), cost.grid());
        assert_eq!(fs::metadata(dir.path().join("cost.raw")).unwrap().len(), 36 * 4);
    }

    #[test]
    fn header_is_the_documented_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.json");
        let field = DistanceField::new(grid(), vec![1.5; 36]).unwrap();
        save_field(&field, &path, Dtype::F32).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(v["dtype"], "f32");
        assert_eq!(v["order"], "x-fastest");
        assert_eq!(v["data"], "f.raw");
        assert_eq!(v["nx"], 3);
        assert_eq!(v["ntheta"], 4);
        let raw = fs::read(dir.path().join("f.raw")).unwrap();
        assert_eq!(&raw[..4], &1.5f32.to_le_bytes());
    }

    #[test]
    fn short_data_is_a_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cost.json");
        save_cost(&CostVolume::uniform(grid(), 0.5).unwrap(), &path).unwrap();
        let raw = dir.path().join("cost.raw");
        let mut bytes = fs::read(&raw).unwrap();
        bytes.truncate(bytes.len() - 4);
        fs::write(&raw, bytes).unwrap();
        assert!(matches!(
            load_cost(&path),
            Err(Error::SizeMismatch { expected: 144, found: 140 })
        ));
    }

    #[test]
    fn zero_cost_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cost.json");
        let mut v = vec![1.0; 36];
        v[5] = 0.0;
        save_volume(&grid(), &v, &path, Dtype::F32).unwrap();
        let err = load_cost(&path).unwrap_err();
        assert!(matches!(err, Error::InvalidCost { index: 5, .. }));
        assert_eq!(err.code(), "invalid_cost");
    }

    #[test]
    fn malformed_headers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.json");
        fs::write(&path, "{\"nx\": 3").unwrap();
        assert_eq!(load_cost(&path).unwrap_err().code(), "malformed_header");

        fs::write(
            &path,
            r#"{"nx":3,"ny":3,"ntheta":4,"hx":1,"hy":1,"origin_x":0,"origin_y":0,"dtype":"f32","order":"theta-fastest","data":"h.raw"}"#,
        )
        .unwrap();
        assert_eq!(load_cost(&path).unwrap_err().code(), "malformed_header");

        fs::write(
            &path,
            r#"{"nx":0,"ny":3,"ntheta":4,"hx":1,"hy":1,"origin_x":0,"origin_y":0,"dtype":"f32","order":"x-fastest","data":"h.raw"}"#,
        )
        .unwrap();
        assert_eq!(load_cost(&path).unwrap_err().code(), "malformed_header");
    }

    #[test]
    fn infinity_survives_both_widths() {
        let dir = tempfile::tempdir().unwrap();
        for dtype in [Dtype::F32, Dtype::F64] {
            let path = dir.path().join(format!("{dtype:?}.json"));
            let mut v = vec![0.25; 36];
            v[0] = 0.0;
            v[35] = f64::INFINITY;
            let field = DistanceField::new(grid(), v.clone()).unwrap();
            save_field(&field, &path, dtype).unwrap();
            assert_eq!(load_field(&path).unwrap().values, v);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_is_bit_exact(raw in proptest::collection::vec(0.0f32..1e6, 36), wide in any::<bool>()) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("v.json");
            let values: Vec<f64> = raw.iter().map(|&v| v as f64).collect();
            let field = DistanceField::new(grid(), values.clone()).unwrap();
            let dtype = if wide { Dtype::F64 } else { Dtype::F32 };
            save_field(&field, &path, dtype).unwrap();
            let back = load_field(&path).unwrap();
            prop_assert_eq!(
                back.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
