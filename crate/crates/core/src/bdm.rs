//! Bit-distribution maps: construction from external encoder traces or
//! internal ledgers, 16x16 regrouping, normalization, variance analysis, and
//! grayscale rendering.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::Plane;

#[derive(Debug, Error)]
pub enum BdmError {
    #[error("trace json: {0}")]
    Json(String),
    #[error("record {index} ({record:?}) has zero-sized or non-finite fields")]
    BadRecord {
        index: usize,
        record: BlockBitRecord,
    },
    #[error("record {index} ({record:?}) extends outside the {width}x{height} picture")]
    OutOfBounds {
        index: usize,
        record: BlockBitRecord,
        width: u32,
        height: u32,
    },
    #[error("blocks overlap at pixel ({x}, {y}): record {first_index} {first:?} and record {second_index} {second:?}")]
    Overlap {
        x: u32,
        y: u32,
        first_index: usize,
        first: BlockBitRecord,
        second_index: usize,
        second: BlockBitRecord,
    },
    #[error("coverage gap at pixel ({x}, {y}): no trace block covers it")]
    CoverageGap { x: u32, y: u32 },
    #[error("maps have different geometry and cannot be normalized together")]
    GeometryMismatch,
    #[error("both maps are all-zero; the shared upper bound is undefined")]
    AllZero,
    #[error("map is empty")]
    Empty,
    #[error("picture dimensions {0}x{1} are not divisible by 16")]
    NotDivisible(u32, u32),
    #[error("expected a {expected} map")]
    WrongScale { expected: &'static str },
}

/// One entry of an external encoder trace: a coded block and its bit cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockBitRecord {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub bits: f64,
}

/// A validated variable-block bit trace covering a whole picture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub width: u32,
    pub height: u32,
    pub blocks: Vec<BlockBitRecord>,
}

/// Whether grid values are indexed at picture scale (one value per
/// `block` x `block` pixel tile) or at the latent-grid scale (one value per
/// latent element, i.e. per 16x16 block of the padded picture).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdmScale {
    Pixel,
    LatentGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BdmGeometry {
    /// Regular grid of square blocks.
    Uniform { block: u32 },
    /// Explicit variable-geometry record list; values parallel the records.
    Blocks(Vec<BlockBitRecord>),
}

/// Per-block average bit costs with geometry metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct BitDistributionMap {
    pub width: u32,
    pub height: u32,
    pub geometry: BdmGeometry,
    pub scale: BdmScale,
    pub grid_w: usize,
    pub grid_h: usize,
    pub values: Vec<f64>,
}

impl BitDistributionMap {
    /// Uniform map over an explicit grid; used by the codec's ledger export.
    pub fn from_grid(
        values: Vec<f64>,
        grid_w: usize,
        grid_h: usize,
        width: u32,
        height: u32,
        scale: BdmScale,
    ) -> Self {
        assert_eq!(values.len(), grid_w * grid_h);
        BitDistributionMap {
            width,
            height,
            geometry: BdmGeometry::Uniform { block: 16 },
            scale,
            grid_w,
            grid_h,
            values,
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.grid_w + col]
    }
}

/// Parses and validates a JSON trace:
/// `{"width":u32,"height":u32,"blocks":[{"x","y","w","h","bits"},...]}`.
/// Blocks must tile the picture exactly: no overlap, no gaps.
pub fn parse_trace(text: &str) -> Result<Trace, BdmError> {
    let trace: Trace = serde_json::from_str(text).map_err(|e| BdmError::Json(e.to_string()))?;
    validate_trace(&trace)?;
    Ok(trace)
}

/// Upper bound on trace picture pixels; the overlap check paints a
/// picture-sized ownership grid.
const MAX_TRACE_PIXELS: u64 = 1 << 26;

fn validate_trace(trace: &Trace) -> Result<(), BdmError> {
    if trace.width == 0 || trace.height == 0 {
        return Err(BdmError::Json("zero picture dimension".into()));
    }
    if trace.width as u64 * trace.height as u64 > MAX_TRACE_PIXELS {
        return Err(BdmError::Json(format!(
            "picture {}x{} exceeds the {MAX_TRACE_PIXELS}-pixel limit",
            trace.width, trace.height
        )));
    }
    for (index, &record) in trace.blocks.iter().enumerate() {
        if record.w == 0 || record.h == 0 || !record.bits.is_finite() || record.bits < 0.0 {
            return Err(BdmError::BadRecord { index, record });
        }
        if record.x + record.w > trace.width || record.y + record.h > trace.height {
            return Err(BdmError::OutOfBounds {
                index,
                record,
                width: trace.width,
                height: trace.height,
            });
        }
    }
    // Paint record indices over a picture-sized grid to find overlaps and
    // gaps with exact pixel coordinates.
    const UNPAINTED: u32 = u32::MAX;
    let (w, h) = (trace.width as usize, trace.height as usize);
    let mut owner = vec![UNPAINTED; w * h];
    for (index, &record) in trace.blocks.iter().enumerate() {
        for y in record.y..record.y + record.h {
            for x in record.x..record.x + record.w {
                let cell = &mut owner[y as usize * w + x as usize];
                if *cell != UNPAINTED {
                    let first_index = *cell as usize;
                    return Err(BdmError::Overlap {
                        x,
                        y,
                        first_index,
                        first: trace.blocks[first_index],
                        second_index: index,
                        second: record,
                    });
                }
                *cell = index as u32;
            }
        }
    }
    if let Some(pos) = owner.iter().position(|&c| c == UNPAINTED) {
        return Err(BdmError::CoverageGap {
            x: (pos % w) as u32,
            y: (pos / w) as u32,
        });
    }
    Ok(())
}

/// The trace at its native variable-block geometry.
pub fn native_map(trace: &Trace) -> BitDistributionMap {
    BitDistributionMap {
        width: trace.width,
        height: trace.height,
        geometry: BdmGeometry::Blocks(trace.blocks.clone()),
        scale: BdmScale::Pixel,
        grid_w: trace.blocks.len(),
        grid_h: 1,
        values: trace.blocks.iter().map(|r| r.bits).collect(),
    }
}

/// Regroups a trace onto the uniform 16x16 grid. Each cell receives every
/// record's bits in proportion to the overlap area, so the total is conserved
/// exactly.
pub fn regroup_16(trace: &Trace) -> BitDistributionMap {
    let grid_w = trace.width.div_ceil(16) as usize;
    let grid_h = trace.height.div_ceil(16) as usize;
    let mut values = vec![0.0; grid_w * grid_h];
    for record in &trace.blocks {
        let area = (record.w as f64) * (record.h as f64);
        let cx0 = (record.x / 16) as usize;
        let cx1 = ((record.x + record.w - 1) / 16) as usize;
        let cy0 = (record.y / 16) as usize;
        let cy1 = ((record.y + record.h - 1) / 16) as usize;
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                let ox = overlap_1d(record.x, record.w, cx as u32 * 16, 16);
                let oy = overlap_1d(record.y, record.h, cy as u32 * 16, 16);
                if ox > 0 && oy > 0 {
                    values[cy * grid_w + cx] += record.bits * (ox * oy) as f64 / area;
                }
            }
        }
    }
    BitDistributionMap {
        width: trace.width,
        height: trace.height,
        geometry: BdmGeometry::Uniform { block: 16 },
        scale: BdmScale::Pixel,
        grid_w,
        grid_h,
        values,
    }
}

#[inline]
fn overlap_1d(a0: u32, alen: u32, b0: u32, blen: u32) -> u64 {
    let lo = a0.max(b0);
    let hi = (a0 + alen).min(b0 + blen);
    hi.saturating_sub(lo) as u64
}

/// Normalizes two same-geometry maps to `[0, max(max(a), max(b))]`; the lower
/// bound is fixed at zero, the theoretical optimum bit cost.
pub fn normalize_pair(
    a: &BitDistributionMap,
    b: &BitDistributionMap,
) -> Result<(BitDistributionMap, BitDistributionMap, f64), BdmError> {
    let same = a.scale == b.scale
        && a.grid_w == b.grid_w
        && a.grid_h == b.grid_h
        && matches!(
            (&a.geometry, &b.geometry),
            (BdmGeometry::Uniform { block: ba }, BdmGeometry::Uniform { block: bb }) if ba == bb
        );
    if !same {
        return Err(BdmError::GeometryMismatch);
    }
    if a.values.is_empty() {
        return Err(BdmError::Empty);
    }
    let upper = a.max().max(b.max());
    if upper == 0.0 {
        return Err(BdmError::AllZero);
    }
    let scale = |m: &BitDistributionMap| BitDistributionMap {
        values: m.values.iter().map(|v| v / upper).collect(),
        geometry: m.geometry.clone(),
        ..*m
    };
    Ok((scale(a), scale(b), upper))
}

/// Population variance over all cells.
pub fn bdm_variance(map: &BitDistributionMap) -> f64 {
    if map.values.is_empty() {
        return 0.0;
    }
    let n = map.values.len() as f64;
    let mean = map.values.iter().sum::<f64>() / n;
    map.values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n
}

/// Re-tags a regrouped uniform-16 map at the latent-grid resolution after
/// checking the picture divides evenly; values are untouched, so the mean is
/// preserved exactly.
pub fn downsample_16(map: &BitDistributionMap) -> Result<BitDistributionMap, BdmError> {
    if map.scale != BdmScale::Pixel || !matches!(map.geometry, BdmGeometry::Uniform { block: 16 }) {
        return Err(BdmError::WrongScale {
            expected: "pixel-scale uniform-16",
        });
    }
    if map.width % 16 != 0 || map.height % 16 != 0 {
        return Err(BdmError::NotDivisible(map.width, map.height));
    }
    Ok(BitDistributionMap {
        scale: BdmScale::LatentGrid,
        geometry: map.geometry.clone(),
        values: map.values.clone(),
        ..*map
    })
}

/// Paints the map as a grayscale picture: each block's gray level is
/// `round(255 * value / upper)`; bright areas are where bits were spent.
pub fn render_pgm(map: &BitDistributionMap, upper: f64) -> Plane {
    assert!(upper > 0.0);
    let mut plane = Plane::new(map.width as usize, map.height as usize);
    let level = |v: f64| (255.0 * v / upper).round().clamp(0.0, 255.0);
    match &map.geometry {
        BdmGeometry::Uniform { block } => {
            let block = *block as usize;
            for gy in 0..map.grid_h {
                for gx in 0..map.grid_w {
                    let v = level(map.get(gx, gy));
                    for y in gy * block..((gy + 1) * block).min(map.height as usize) {
                        for x in gx * block..((gx + 1) * block).min(map.width as usize) {
                            plane.set(x, y, v);
                        }
                    }
                }
            }
        }
        BdmGeometry::Blocks(records) => {
            for (record, &value) in records.iter().zip(&map.values) {
                let v = level(value);
                for y in record.y..record.y + record.h {
                    for x in record.x..record.x + record.w {
                        plane.set(x as usize, y as usize, v);
                    }
                }
            }
        }
    }
    plane
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_json(width: u32, height: u32, blocks: &[(u32, u32, u32, u32, f64)]) -> String {
        let blocks: Vec<BlockBitRecord> = blocks
            .iter()
            .map(|&(x, y, w, h, bits)| BlockBitRecord { x, y, w, h, bits })
            .collect();
        serde_json::to_string(&Trace {
            width,
            height,
            blocks,
        })
        .unwrap()
    }

    #[test]
    fn single_record_covering_picture_parses() {
        let t = parse_trace(&trace_json(32, 32, &[(0, 0, 32, 32, 100.0)])).unwrap();
        assert_eq!(t.blocks.len(), 1);
    }

    #[test]
    fn four_way_split_parses() {
        let t = parse_trace(&trace_json(
            32,
            32,
            &[
                (0, 0, 16, 16, 10.0),
                (16, 0, 16, 16, 20.0),
                (0, 16, 16, 16, 30.0),
                (16, 16, 16, 16, 40.0),
            ],
        ))
        .unwrap();
        assert_eq!(t.blocks.len(), 4);
    }

    #[test]
    fn overlap_is_reported_with_both_records() {
        let err = parse_trace(&trace_json(
            32,
            16,
            &[(0, 0, 17, 16, 1.0), (16, 0, 16, 16, 1.0)],
        ))
        .unwrap_err();
        match err {
            BdmError::Overlap {
                x,
                y,
                first_index,
                second_index,
                ..
            } => {
                assert_eq!((x, y), (16, 0));
                assert_eq!((first_index, second_index), (0, 1));
            }
            other => panic!("expected overlap, got {other}"),
        }
    }

    #[test]
    fn coverage_gap_is_reported() {
        let err = parse_trace(&trace_json(32, 16, &[(0, 0, 16, 16, 1.0)])).unwrap_err();
        match err {
            BdmError::CoverageGap { x, y } => assert_eq!((x, y), (16, 0)),
            other => panic!("expected gap, got {other}"),
        }
    }

    #[test]
    fn malformed_json_and_bad_records() {
        assert!(matches!(parse_trace("{"), Err(BdmError::Json(_))));
        assert!(matches!(
            parse_trace(&trace_json(8, 8, &[(0, 0, 0, 8, 1.0)])),
            Err(BdmError::BadRecord { .. })
        ));
        assert!(matches!(
            parse_trace(&trace_json(8, 8, &[(4, 0, 8, 8, 1.0)])),
            Err(BdmError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn regroup_splits_by_area_and_conserves_bits() {
        // One 32x32 record of 100 bits over a 32x32 picture: four cells of 25.
        let t = parse_trace(&trace_json(32, 32, &[(0, 0, 32, 32, 100.0)])).unwrap();
        let m = regroup_16(&t);
        assert_eq!((m.grid_w, m.grid_h), (2, 2));
        assert!(m.values.iter().all(|&v| (v - 25.0).abs() < 1e-12));
        assert!((m.total() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn aligned_record_lands_in_one_cell() {
        let t = parse_trace(&trace_json(
            32,
            16,
            &[
                (0, 0, 16, 16, 40.0),
                (16, 0, 8, 16, 10.0),
                (24, 0, 8, 16, 6.0),
            ],
        ))
        .unwrap();
        let m = regroup_16(&t);
        // Cell 0 gets the aligned 40-bit record exactly; the two half-cell
        // records both fall entirely inside cell 1.
        assert_eq!(m.get(0, 0), 40.0);
        assert!((m.get(1, 0) - 16.0).abs() < 1e-12);
        assert!((m.total() - 56.0).abs() < 1e-9);
    }

    #[test]
    fn regroup_conservation_on_irregular_split() {
        let t = parse_trace(&trace_json(
            48,
            48,
            &[
                (0, 0, 48, 8, 13.5),
                (0, 8, 24, 40, 77.25),
                (24, 8, 24, 40, 9.125),
            ],
        ))
        .unwrap();
        let m = regroup_16(&t);
        let total: f64 = t.blocks.iter().map(|b| b.bits).sum();
        assert!(((m.total() - total) / total).abs() < 1e-6);
    }

    #[test]
    fn normalize_pair_examples() {
        let a = BitDistributionMap::from_grid(vec![2.0, 4.0], 2, 1, 32, 16, BdmScale::Pixel);
        let b = BitDistributionMap::from_grid(vec![1.0, 8.0], 2, 1, 32, 16, BdmScale::Pixel);
        let (an, bn, upper) = normalize_pair(&a, &b).unwrap();
        assert_eq!(upper, 8.0);
        assert_eq!(an.values, vec![0.25, 0.5]);
        assert_eq!(bn.values, vec![0.125, 1.0]);

        let (an2, bn2, _) = normalize_pair(&a, &a).unwrap();
        assert_eq!(an2.values, bn2.values);
        assert_eq!(an2.max(), 1.0);

        // Scaling both inputs leaves the normalized maps unchanged.
        let a3 = BitDistributionMap::from_grid(vec![6.0, 12.0], 2, 1, 32, 16, BdmScale::Pixel);
        let b3 = BitDistributionMap::from_grid(vec![3.0, 24.0], 2, 1, 32, 16, BdmScale::Pixel);
        let (an3, bn3, _) = normalize_pair(&a3, &b3).unwrap();
        assert_eq!(an3.values, an.values);
        assert_eq!(bn3.values, bn.values);
    }

    #[test]
    fn normalize_pair_rejects_zero_and_mismatch() {
        let z = BitDistributionMap::from_grid(vec![0.0, 0.0], 2, 1, 32, 16, BdmScale::Pixel);
        assert!(matches!(normalize_pair(&z, &z), Err(BdmError::AllZero)));
        let other = BitDistributionMap::from_grid(vec![0.0], 1, 1, 16, 16, BdmScale::Pixel);
        assert!(matches!(
            normalize_pair(&z, &other),
            Err(BdmError::GeometryMismatch)
        ));
    }

    #[test]
    fn variance_known_values_and_bound() {
        let flat = BitDistributionMap::from_grid(vec![0.7; 6], 3, 2, 48, 32, BdmScale::Pixel);
        assert!(bdm_variance(&flat).abs() < 1e-30);

        let two = BitDistributionMap::from_grid(vec![0.0, 1.0], 2, 1, 32, 16, BdmScale::Pixel);
        assert!((bdm_variance(&two) - 0.25).abs() < 1e-15);

        // Popoviciu bound for values in [0, 1].
        let m = BitDistributionMap::from_grid(
            vec![0.1, 0.9, 0.4, 1.0, 0.0, 0.3],
            3,
            2,
            48,
            32,
            BdmScale::Pixel,
        );
        let v = bdm_variance(&m);
        assert!((0.0..=0.25).contains(&v));
    }

    #[test]
    fn downsample_retags_and_preserves_mean() {
        let t = parse_trace(&trace_json(64, 64, &[(0, 0, 64, 64, 160.0)])).unwrap();
        let m = regroup_16(&t);
        let d = downsample_16(&m).unwrap();
        assert_eq!(d.scale, BdmScale::LatentGrid);
        assert_eq!((d.grid_w, d.grid_h), (4, 4));
        assert_eq!(d.values, m.values);
        assert!((d.mean() - m.mean()).abs() < 1e-12);

        let odd = parse_trace(&trace_json(40, 32, &[(0, 0, 40, 32, 1.0)])).unwrap();
        assert!(matches!(
            downsample_16(&regroup_16(&odd)),
            Err(BdmError::NotDivisible(40, 32))
        ));
    }

    #[test]
    fn render_levels() {
        let m = BitDistributionMap::from_grid(
            vec![0.0, 5.0, 10.0, 10.0],
            2,
            2,
            32,
            32,
            BdmScale::Pixel,
        );
        let plane = render_pgm(&m, 10.0);
        assert_eq!(plane.get(0, 0), 0.0);
        assert_eq!(plane.get(16, 0), 128.0);
        assert_eq!(plane.get(0, 16), 255.0);
        let mut levels: Vec<i64> = plane.data.iter().map(|&v| v as i64).collect();
        levels.sort_unstable();
        levels.dedup();
        assert_eq!(levels, vec![0, 128, 255]);

        let zero = BitDistributionMap::from_grid(vec![0.0; 4], 2, 2, 32, 32, BdmScale::Pixel);
        let plane = render_pgm(&zero, 1.0);
        assert!(plane.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn render_native_geometry() {
        let t = parse_trace(&trace_json(
            32,
            16,
            &[(0, 0, 24, 16, 30.0), (24, 0, 8, 16, 60.0)],
        ))
        .unwrap();
        let m = native_map(&t);
        let plane = render_pgm(&m, 60.0);
        assert_eq!(plane.get(0, 0), 128.0);
        assert_eq!(plane.get(31, 15), 255.0);
    }
}
