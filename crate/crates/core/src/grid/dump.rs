//! Flat binary grid dumps: `u32 level`, `u32 cells`, then `f32` node values,
//! all little-endian, x-fastest.

use super::{LevelGrid, NodeState};
use crate::error::{Error, Result};
use std::io::{Read, Write};

pub fn write_dump(grid: &LevelGrid, mut w: impl Write) -> Result<()> {
    w.write_all(&grid.level().to_le_bytes())?;
    w.write_all(&(grid.cells() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(grid.len() * 4);
    for v in grid.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Same header followed by a single `(cells+1)^2` plane, used for depth maps.
pub fn write_plane_dump(level: u32, cells: usize, plane: &[f32], mut w: impl Write) -> Result<()> {
    if plane.len() != (cells + 1).pow(2) {
        return Err(Error::DimensionMismatch {
            expected: (cells + 1).pow(2),
            actual: plane.len(),
        });
    }
    w.write_all(&level.to_le_bytes())?;
    w.write_all(&(cells as u32).to_le_bytes())?;
    for v in plane {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a volume dump; all nodes come back as `Evaluated`.
pub fn read_dump(mut r: impl Read) -> Result<LevelGrid> {
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let level = u32::from_le_bytes(word);
    r.read_exact(&mut word)?;
    let cells = u32::from_le_bytes(word) as usize;
    if cells == 0 {
        return Err(Error::Parse("grid dump with zero cells".into()));
    }
    let n = (cells + 1).pow(3);
    let mut raw = vec![0u8; n * 4];
    r.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(LevelGrid::from_values(level, cells, values, NodeState::Evaluated))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_roundtrip() {
        let vals: Vec<f32> = (0..125).map(|i| i as f32 / 124.0).collect();
        let g = LevelGrid::from_values(2, 4, vals, NodeState::Evaluated);
        let mut buf = Vec::new();
        write_dump(&g, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 125 * 4);
        assert_eq!(&buf[0..4], &2u32.to_le_bytes());
        assert_eq!(read_dump(buf.as_slice()).unwrap(), g);
    }
}
