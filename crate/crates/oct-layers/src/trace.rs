//! Per-column surface traces.

use serde::{Deserialize, Serialize};

/// Identity of a traced surface. S1 is the inner limiting membrane, S7 the
/// Bruch's membrane; the choroid trace bounds the bright band found at the
/// first segmentation iteration from below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SurfaceLabel {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
    Choroid,
}

impl SurfaceLabel {
    pub const ALL: [SurfaceLabel; 8] = [
        SurfaceLabel::S1,
        SurfaceLabel::S2,
        SurfaceLabel::S3,
        SurfaceLabel::S4,
        SurfaceLabel::S5,
        SurfaceLabel::S6,
        SurfaceLabel::S7,
        SurfaceLabel::Choroid,
    ];

    pub const SURFACES: [SurfaceLabel; 7] = [
        SurfaceLabel::S1,
        SurfaceLabel::S2,
        SurfaceLabel::S3,
        SurfaceLabel::S4,
        SurfaceLabel::S5,
        SurfaceLabel::S6,
        SurfaceLabel::S7,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SurfaceLabel::S1 => "S1",
            SurfaceLabel::S2 => "S2",
            SurfaceLabel::S3 => "S3",
            SurfaceLabel::S4 => "S4",
            SurfaceLabel::S5 => "S5",
            SurfaceLabel::S6 => "S6",
            SurfaceLabel::S7 => "S7",
            SurfaceLabel::Choroid => "choroid",
        }
    }

    pub fn parse(s: &str) -> Option<SurfaceLabel> {
        Self::ALL.iter().copied().find(|l| l.name() == s)
    }

    /// Position in [`SurfaceLabel::ALL`] (anatomical top-to-bottom order).
    pub fn canonical_index(&self) -> usize {
        Self::ALL.iter().position(|l| l == self).unwrap()
    }
}

/// Per-column row coordinate of one surface. Columns the surface does not
/// cross are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceTrace {
    pub label: SurfaceLabel,
    pub rows: Vec<Option<usize>>,
}

impl SurfaceTrace {
    pub fn new(label: SurfaceLabel, rows: Vec<Option<usize>>) -> Self {
        SurfaceTrace { label, rows }
    }

    pub fn undefined(label: SurfaceLabel, width: usize) -> Self {
        SurfaceTrace {
            label,
            rows: vec![None; width],
        }
    }

    pub fn width(&self) -> usize {
        self.rows.len()
    }

    pub fn defined_columns(&self) -> usize {
        self.rows.iter().filter(|r| r.is_some()).count()
    }

    /// Fraction of columns with a defined row.
    pub fn coverage(&self) -> f64 {
        self.defined_columns() as f64 / self.rows.len() as f64
    }

    /// Width of the x-range spanned by defined columns (inclusive), 0 if
    /// the trace is everywhere undefined.
    pub fn x_extent(&self) -> usize {
        let first = self.rows.iter().position(|r| r.is_some());
        let last = self.rows.iter().rposition(|r| r.is_some());
        match (first, last) {
            (Some(f), Some(l)) => l - f + 1,
            _ => 0,
        }
    }

    /// Full-width real-valued trace: linear interpolation between defined
    /// columns, nearest-value extrapolation at the ends. Returns `None` when
    /// nothing is defined.
    pub fn interpolate_full(&self) -> Option<Vec<f64>> {
        let n = self.rows.len();
        let defined: Vec<(usize, f64)> = self
            .rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.map(|v| (i, v as f64)))
            .collect();
        if defined.is_empty() {
            return None;
        }
        let mut out = vec![0.0; n];
        let mut seg = 0usize;
        for (col, slot) in out.iter_mut().enumerate() {
            if col <= defined[0].0 {
                *slot = defined[0].1;
                continue;
            }
            if col >= defined[defined.len() - 1].0 {
                *slot = defined[defined.len() - 1].1;
                continue;
            }
            while defined[seg + 1].0 < col {
                seg += 1;
            }
            let (x0, y0) = defined[seg];
            let (x1, y1) = defined[seg + 1];
            if col == x0 {
                *slot = y0;
            } else {
                let t = (col - x0) as f64 / (x1 - x0) as f64;
                *slot = y0 + t * (y1 - y0);
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_and_extent() {
        let t = SurfaceTrace::new(
            SurfaceLabel::S1,
            vec![None, Some(3), Some(4), None, Some(6), None],
        );
        assert_eq!(t.defined_columns(), 3);
        assert!((t.coverage() - 0.5).abs() < 1e-12);
        assert_eq!(t.x_extent(), 4); // columns 1..=4
    }

    #[test]
    fn interpolation_fills_gaps_and_ends() {
        let t = SurfaceTrace::new(SurfaceLabel::S2, vec![None, Some(10), None, Some(16), None]);
        let full = t.interpolate_full().unwrap();
        assert_eq!(full, vec![10.0, 10.0, 13.0, 16.0, 16.0]);
    }

    #[test]
    fn interpolation_of_empty_trace() {
        let t = SurfaceTrace::undefined(SurfaceLabel::S3, 5);
        assert!(t.interpolate_full().is_none());
    }

    #[test]
    fn label_round_trip() {
        for l in SurfaceLabel::ALL {
            assert_eq!(SurfaceLabel::parse(l.name()), Some(l));
        }
        assert_eq!(SurfaceLabel::parse("S9"), None);
    }
}
