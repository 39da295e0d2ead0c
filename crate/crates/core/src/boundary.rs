//! Class boundaries and the saved-annotation-effort criterion.
//!
//! A boundary pixel of class `c` is a pixel labeled `c` with at least one
//! 4-neighbor outside the image or carrying another label. Curve length is
//! measured as a boundary pixel count. Saved effort is the share of the
//! ground-truth boundary that the predicted boundary already covers.

use crate::error::{Error, Result};
use crate::tensor::{LabelMap, CSF, GM, NUM_CLASSES, WM};

/// Boundary pixels of one class in a 2D map, sorted row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundarySet {
    class_id: u8,
    dims: (usize, usize),
    pixels: Vec<(usize, usize)>,
}

impl BoundarySet {
    pub fn class_id(&self) -> u8 {
        self.class_id
    }

    pub fn source_dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

fn dims2(map: &LabelMap) -> Result<(usize, usize)> {
    match map.dims() {
        &[r, c] => Ok((r, c)),
        d => Err(Error::invariant(format!(
            "boundary extraction needs a 2D map, got rank {}",
            d.len()
        ))),
    }
}

pub fn extract_boundary(map: &LabelMap, class_id: u8) -> Result<BoundarySet> {
    let (rows, cols) = dims2(map)?;
    let mut pixels = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if map.at(r, c) != class_id {
                continue;
            }
            let edge = r == 0 || c == 0 || r + 1 == rows || c + 1 == cols;
            if edge
                || map.at(r - 1, c) != class_id
                || map.at(r + 1, c) != class_id
                || map.at(r, c - 1) != class_id
                || map.at(r, c + 1) != class_id
            {
                pixels.push((r, c));
            }
        }
    }
    Ok(BoundarySet {
        class_id,
        dims: (rows, cols),
        pixels,
    })
}

/// Number of ground-truth boundary pixels within Chebyshev distance `tol` of a predicted one.
pub fn boundary_overlap(gt_b: &BoundarySet, pred_b: &BoundarySet, tol: usize) -> Result<usize> {
    if gt_b.class_id != pred_b.class_id {
        return Err(Error::invariant(format!(
            "boundary classes differ: {} vs {}",
            gt_b.class_id, pred_b.class_id
        )));
    }
    if gt_b.dims != pred_b.dims {
        return Err(Error::DimMismatch {
            left: vec![gt_b.dims.0, gt_b.dims.1],
            right: vec![pred_b.dims.0, pred_b.dims.1],
        });
    }
    let (rows, cols) = gt_b.dims;
    // Summed-area table of the predicted boundary mask, (rows+1) x (cols+1).
    let w = cols + 1;
    let mut sat = vec![0u32; (rows + 1) * w];
    let mut mask = vec![0u32; rows * cols];
    for &(r, c) in &pred_b.pixels {
        mask[r * cols + c] = 1;
    }
    for r in 0..rows {
        let mut run = 0;
        for c in 0..cols {
            run += mask[r * cols + c];
            sat[(r + 1) * w + c + 1] = sat[r * w + c + 1] + run;
        }
    }
    let count = gt_b
        .pixels
        .iter()
        .filter(|&&(r, c)| {
            let (r0, r1) = (r.saturating_sub(tol), (r + tol + 1).min(rows));
            let (c0, c1) = (c.saturating_sub(tol), (c + tol + 1).min(cols));
            sat[r1 * w + c1] + sat[r0 * w + c0] > sat[r0 * w + c1] + sat[r1 * w + c0]
        })
        .count();
    Ok(count)
}

/// Ground-truth boundary length and covered length, summed over axial slices for 3D maps.
fn effort_counts(gt: &LabelMap, pred: &LabelMap, class_id: u8, tol: usize) -> Result<(usize, usize)> {
    if gt.dims() != pred.dims() {
        return Err(Error::DimMismatch {
            left: gt.dims().to_vec(),
            right: pred.dims().to_vec(),
        });
    }
    let mut total = (0, 0);
    for (g, p) in gt.axial_slices().iter().zip(pred.axial_slices().iter()) {
        let gb = extract_boundary(g, class_id)?;
        let pb = extract_boundary(p, class_id)?;
        total.0 += gb.len();
        total.1 += boundary_overlap(&gb, &pb, tol)?;
    }
    Ok(total)
}

fn percentage(overlap: usize, length: usize) -> f64 {
    if length == 0 {
        100.0
    } else {
        100.0 * overlap as f64 / length as f64
    }
}

/// Saved effort in percent for one tissue class; 100 when the ground truth has no boundary.
pub fn saved_effort(gt: &LabelMap, pred: &LabelMap, class_id: u8, tol: usize) -> Result<f64> {
    if !(1..NUM_CLASSES as u8).contains(&class_id) {
        return Err(Error::invariant(format!(
            "saved effort is defined for tissue classes 1..=3, got {class_id}"
        )));
    }
    let (len, overlap) = effort_counts(gt, pred, class_id, tol)?;
    Ok(percentage(overlap, len))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EffortRow {
    pub class_id: u8,
    pub gt_boundary_len: usize,
    pub overlap_len: usize,
    pub saved_effort_pct: f64,
}

/// Saved effort for CSF, GM and WM.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EffortReport {
    pub rows: [EffortRow; 3],
}

pub fn class_name(class_id: u8) -> &'static str {
    match class_id {
        0 => "background",
        CSF => "CSF",
        GM => "GM",
        WM => "WM",
        _ => "unknown",
    }
}

impl EffortReport {
    pub const CSV_HEADER: &'static str = "class,gt_boundary_len,overlap_len,saved_effort_pct";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{}\n",
                class_name(r.class_id),
                r.gt_boundary_len,
                r.overlap_len,
                r.saved_effort_pct
            ));
        }
        s
    }
}

pub fn effort_report(gt: &LabelMap, pred: &LabelMap, tol: usize) -> Result<EffortReport> {
    let mut rows = [EffortRow {
        class_id: 0,
        gt_boundary_len: 0,
        overlap_len: 0,
        saved_effort_pct: 100.0,
    }; 3];
    for (row, class_id) in rows.iter_mut().zip([CSF, GM, WM]) {
        let (len, overlap) = effort_counts(gt, pred, class_id, tol)?;
        *row = EffortRow {
            class_id,
            gt_boundary_len: len,
            overlap_len: overlap,
            saved_effort_pct: percentage(overlap, len),
        };
    }
    Ok(EffortReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(side: usize, top: usize, left: usize, size: usize) -> LabelMap {
        let mut d = vec![0u8; side * side];
        for r in top..top + size {
            for c in left..left + size {
                d[r * side + c] = 1;
            }
        }
        LabelMap::new(vec![side, side], d).unwrap()
    }

    #[test]
    fn full_map_boundary_is_the_border_ring() {
        let m = LabelMap::filled(vec![5, 6], 2).unwrap();
        let b = extract_boundary(&m, 2).unwrap();
        assert_eq!(b.len(), 2 * 6 + 2 * 3);
        assert!(b.pixels().iter().all(|&(r, c)| r == 0 || c == 0 || r == 4 || c == 5));
    }

    #[test]
    fn single_pixel_is_its_own_boundary() {
        let mut d = vec![0u8; 25];
        d[12] = 1;
        let m = LabelMap::new(vec![5, 5], d).unwrap();
        assert_eq!(extract_boundary(&m, 1).unwrap().pixels(), &[(2, 2)]);
    }

    #[test]
    fn square_perimeter_has_twelve_pixels() {
        let b = extract_boundary(&square(8, 2, 2, 4), 1).unwrap();
        assert_eq!(b.len(), 12);
        assert!(!b.pixels().contains(&(3, 3)));
    }

    #[test]
    fn overlap_examples() {
        let a = extract_boundary(&square(8, 2, 2, 4), 1).unwrap();
        assert_eq!(boundary_overlap(&a, &a, 0).unwrap(), 12);
        let far = extract_boundary(&square(16, 11, 11, 4), 1).unwrap();
        let a16 = extract_boundary(&square(16, 0, 0, 4), 1).unwrap();
        assert_eq!(boundary_overlap(&a16, &far, 0).unwrap(), 0);
        let shifted = extract_boundary(&square(8, 3, 2, 4), 1).unwrap();
        assert_eq!(boundary_overlap(&a, &shifted, 1).unwrap(), 12);
    }

    #[test]
    fn shifted_square_effort_tol0() {
        // gt rows 2..6, pred rows 3..7 (cols 2..6). Only the side columns of gt rows 3..=5
        // lie on the pred perimeter: 6 of the 12 gt boundary pixels.
        let gt = square(8, 2, 2, 4);
        let pred = square(8, 3, 2, 4);
        assert_eq!(saved_effort(&gt, &pred, 1, 0).unwrap(), 50.0);
    }

    #[test]
    fn overlap_checks_compatibility() {
        let a = extract_boundary(&square(8, 2, 2, 4), 1).unwrap();
        let b = extract_boundary(&square(8, 2, 2, 4), 0).unwrap();
        assert!(boundary_overlap(&a, &b, 0).is_err());
        let c = extract_boundary(&square(9, 2, 2, 4), 1).unwrap();
        assert!(boundary_overlap(&a, &c, 0).is_err());
    }

    #[test]
    fn effort_edge_conventions() {
        let gt = square(8, 2, 2, 4);
        assert_eq!(saved_effort(&gt, &gt, 1, 0).unwrap(), 100.0);
        let empty = LabelMap::filled(vec![8, 8], 0).unwrap();
        assert_eq!(saved_effort(&gt, &empty, 1, 0).unwrap(), 0.0);
        // no gt boundary: nothing left to draw, false positives are invisible
        assert_eq!(saved_effort(&empty, &gt, 1, 0).unwrap(), 100.0);
        assert!(saved_effort(&gt, &gt, 0, 0).is_err());
    }

    #[test]
    fn effort_is_not_symmetric() {
        // 2x2 square sharing its top-left corner with a 5x5 one: 3 of 4 small boundary
        // pixels lie on the big boundary, but only 3 of 16 the other way round.
        let small = square(10, 2, 2, 2);
        let big = square(10, 2, 2, 5);
        let a = saved_effort(&small, &big, 1, 0).unwrap();
        let b = saved_effort(&big, &small, 1, 0).unwrap();
        assert_eq!(a, 75.0);
        assert_eq!(b, 18.75);
    }

    #[test]
    fn three_d_aggregates_counts() {
        let s0 = square(8, 2, 2, 4);
        let s1 = LabelMap::filled(vec![8, 8], 0).unwrap();
        let gt = LabelMap::stack_axial(&[s0.clone(), s0.clone()]).unwrap();
        let pred = LabelMap::stack_axial(&[s0, s1]).unwrap();
        let r = effort_report(&gt, &pred, 0).unwrap();
        assert_eq!(r.rows[0].gt_boundary_len, 24);
        assert_eq!(r.rows[0].overlap_len, 12);
        assert_eq!(r.rows[0].saved_effort_pct, 50.0);
        // GM and WM absent everywhere
        assert_eq!(r.rows[1].saved_effort_pct, 100.0);
    }

    #[test]
    fn report_csv_layout() {
        let gt = square(8, 2, 2, 4);
        let csv = effort_report(&gt, &gt, 0).unwrap().to_csv();
        assert_eq!(
            csv,
            "class,gt_boundary_len,overlap_len,saved_effort_pct\nCSF,12,12,100\nGM,0,0,100\nWM,0,0,100\n"
        );
    }
}
