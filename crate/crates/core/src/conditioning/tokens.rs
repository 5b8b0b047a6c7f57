use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use super::ConditioningError;

/// Magic bytes of the binary token file.
pub const TOKEN_MAGIC: &[u8; 4] = b"GSTK";

/// `L × C` token features, all finite.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenMatrix(Array2<f64>);

impl TokenMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self, ConditioningError> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ConditioningError::NonFinite);
        }
        Ok(Self(data))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(Array2::zeros((rows, cols)))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ndarray::ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    /// Stack row blocks (e.g. per-view token sets) into one matrix.
    pub fn concat_rows(parts: &[TokenMatrix]) -> Result<Self, ConditioningError> {
        let views: Vec<_> = parts.iter().map(|p| p.0.view()).collect();
        ndarray::concatenate(ndarray::Axis(0), &views)
            .map(Self)
            .map_err(|e| ConditioningError::Shape(e.to_string()))
    }

    /// Header: magic, `u32` rows, `u32` cols; body: row-major `f32`, all little-endian.
    pub fn write_to(&self, mut w: impl Write) -> Result<(), ConditioningError> {
        w.write_all(TOKEN_MAGIC)?;
        w.write_u32::<LittleEndian>(dim_u32(self.rows())?)?;
        w.write_u32::<LittleEndian>(dim_u32(self.cols())?)?;
        for v in self.0.iter() {
            w.write_f32::<LittleEndian>(*v as f32)?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, ConditioningError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != TOKEN_MAGIC {
            return Err(ConditioningError::Format("bad magic".into()));
        }
        let rows = r.read_u32::<LittleEndian>()? as usize;
        let cols = r.read_u32::<LittleEndian>()? as usize;
        let mut body = vec![0f32; rows * cols];
        r.read_f32_into::<LittleEndian>(&mut body)
            .map_err(|e| ConditioningError::Format(format!("truncated body: {e}")))?;
        let data = Array2::from_shape_vec((rows, cols), body.into_iter().map(f64::from).collect())
            .map_err(|e| ConditioningError::Shape(e.to_string()))?;
        Self::new(data)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConditioningError> {
        let mut buf = Vec::with_capacity(12 + 4 * self.0.len());
        self.write_to(&mut buf)?;
        crate::io::write_atomic(path, &buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ConditioningError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn dim_u32(n: usize) -> Result<u32, ConditioningError> {
    u32::try_from(n).map_err(|_| ConditioningError::Shape(format!("dimension {n} exceeds u32")))
}
