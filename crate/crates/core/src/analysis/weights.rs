use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::Gswin;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightMapFiles {
    pub csv: PathBuf,
    pub pgm: PathBuf,
    pub rows: usize,
    pub cols: usize,
}

/// Effective mixing weight `W' + W_rel` of one head laid out as a grid of
/// `h×w` tiles: tile `(x, y)` holds `W[(x, y), (·, ·)]`, so the whole map is `h²×w²`.
/// Indices are zero-based.
pub fn weight_map_grid(model: &Gswin, stage: usize, layer: usize, head: usize) -> Result<Vec<Vec<f64>>> {
    let stages = model.stages.len();
    let block = model.block(stage, layer).ok_or_else(|| {
        let depth = model.stages.get(stage).map(|s| s.blocks.len());
        Error::WeightMap(match depth {
            None => format!("stage {stage} out of range (model has {stages})"),
            Some(d) => format!("layer {layer} out of range (stage {stage} has {d})"),
        })
    })?;
    let k = block.sgu.heads();
    if head >= k {
        return Err(Error::WeightMap(format!("head {head} out of range (block has {k})")));
    }
    let (h, w) = block.sgu.window();
    let n = h * w;
    let weight = block.sgu.effective_weight()?.to_vec();
    let mut grid = vec![vec![0.0; w * w]; h * h];
    for q in 0..n {
        let (x, y) = (q / w, q % w);
        for key in 0..n {
            let (i, j) = (key / w, key % w);
            grid[x * h + i][y * w + j] = weight[(q * n + key) * k + head];
        }
    }
    Ok(grid)
}

/// Writes `<stem>.csv` (exact values) and `<stem>.pgm` (8-bit, min→0, max→255) into `dir`.
pub fn export_weight_maps(model: &Gswin, stage: usize, layer: usize, head: usize, dir: &Path) -> Result<WeightMapFiles> {
    let grid = weight_map_grid(model, stage, layer, head)?;
    let (rows, cols) = (grid.len(), grid[0].len());
    fs::create_dir_all(dir)?;
    let stem = format!("stage{stage}_layer{layer}_head{head}");
    let csv = dir.join(format!("{stem}.csv"));
    let pgm = dir.join(format!("{stem}.pgm"));

    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(&csv)?;
    for row in &grid {
        writer.write_record(row.iter().map(f64::to_string))?;
    }
    writer.flush()?;

    let (lo, hi) = grid
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let mut f = fs::File::create(&pgm)?;
    write!(f, "P5\n{cols} {rows}\n255\n")?;
    let pixels: Vec<u8> = grid
        .iter()
        .flatten()
        .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 })
        .collect();
    f.write_all(&pixels)?;
    Ok(WeightMapFiles { csv, pgm, rows, cols })
}

pub fn read_weight_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut grid = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = record?
            .iter()
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::WeightMap(format!("row {}: {v:?}: {e}", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        grid.push(row);
    }
    Ok(grid)
}
