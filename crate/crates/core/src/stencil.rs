//! Stencil definitions: the six benchmark presets, their weights, and flop accounting.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Neighbor pattern of a stencil.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    /// Axis-aligned neighbors only.
    Star,
    /// Every neighbor in the radius-`r` cube.
    Box,
}

/// Offset of a neighbor relative to the updated point. Only the first `d`
/// components are meaningful; the last meaningful component is the
/// unit-stride dimension.
pub type Offset = [isize; 3];

/// The benchmark presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    OneD3P,
    OneD5P,
    TwoD5P,
    TwoD9P,
    ThreeD7P,
    ThreeD27P,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::OneD3P,
        Preset::OneD5P,
        Preset::TwoD5P,
        Preset::TwoD9P,
        Preset::ThreeD7P,
        Preset::ThreeD27P,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Preset::OneD3P => "1d3p",
            Preset::OneD5P => "1d5p",
            Preset::TwoD5P => "2d5p",
            Preset::TwoD9P => "2d9p",
            Preset::ThreeD7P => "3d7p",
            Preset::ThreeD27P => "3d27p",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A constant-coefficient stencil: dimension, order, shape and weight table.
///
/// Immutable once built. Weights are kept in lexicographic offset order so
/// every consumer sees the same summation order.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilSpec {
    name: String,
    d: usize,
    r: usize,
    shape: Shape,
    weights: Vec<(Offset, f64)>,
}

impl StencilSpec {
    /// Builds a spec from an explicit weight table, checking the star/box
    /// invariants.
    pub fn new(
        name: impl Into<String>,
        d: usize,
        r: usize,
        shape: Shape,
        mut weights: Vec<(Offset, f64)>,
    ) -> Result<Self> {
        let name = name.into();
        let bad = |why: &str| Error::Usage(format!("invalid stencil `{name}`: {why}"));
        if !(1..=3).contains(&d) {
            return Err(bad("dimension must be 1, 2 or 3"));
        }
        if r == 0 {
            return Err(bad("order must be positive"));
        }
        weights.sort_by(|a, b| a.0.cmp(&b.0));
        let ri = r as isize;
        for (off, _) in &weights {
            if off[d..].iter().any(|&c| c != 0) {
                return Err(bad("offset has components beyond the dimension"));
            }
            if off[..d].iter().any(|c| c.abs() > ri) {
                return Err(bad("offset exceeds the order"));
            }
            if shape == Shape::Star && off[..d].iter().filter(|&&c| c != 0).count() > 1 {
                return Err(bad("star stencil offset is not axis-aligned"));
            }
        }
        if weights.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(bad("duplicate offset"));
        }
        if !weights.iter().any(|(o, _)| *o == [0, 0, 0]) {
            return Err(bad("zero offset missing"));
        }
        let expected = match shape {
            Shape::Star => 2 * d * r + 1,
            Shape::Box => (2 * r + 1).pow(d as u32),
        };
        if weights.len() != expected {
            return Err(bad("weight count does not match the shape"));
        }
        Ok(Self {
            name,
            d,
            r,
            shape,
            weights,
        })
    }

    pub fn preset(preset: Preset) -> Self {
        // Symmetric dyadic weights summing to exactly one: binomial rows for
        // the 1D and box stencils, a heavy center for the 2D/3D stars.
        let (d, r, shape, weights): (usize, usize, Shape, Vec<(Offset, f64)>) = match preset {
            Preset::OneD3P => (
                1,
                1,
                Shape::Star,
                vec![([-1, 0, 0], 0.25), ([0, 0, 0], 0.5), ([1, 0, 0], 0.25)],
            ),
            Preset::OneD5P => (
                1,
                2,
                Shape::Star,
                vec![
                    ([-2, 0, 0], 1.0 / 16.0),
                    ([-1, 0, 0], 4.0 / 16.0),
                    ([0, 0, 0], 6.0 / 16.0),
                    ([1, 0, 0], 4.0 / 16.0),
                    ([2, 0, 0], 1.0 / 16.0),
                ],
            ),
            Preset::TwoD5P => {
                let mut w = vec![([0, 0, 0], 0.5)];
                for axis in 0..2 {
                    for s in [-1, 1] {
                        let mut o = [0; 3];
                        o[axis] = s;
                        w.push((o, 0.125));
                    }
                }
                (2, 1, Shape::Star, w)
            }
            Preset::TwoD9P => {
                let row = [0.25, 0.5, 0.25];
                let mut w = Vec::with_capacity(9);
                for a in -1..=1isize {
                    for b in -1..=1isize {
                        w.push(([a, b, 0], row[(a + 1) as usize] * row[(b + 1) as usize]));
                    }
                }
                (2, 1, Shape::Box, w)
            }
            Preset::ThreeD7P => {
                let mut w = vec![([0, 0, 0], 0.25)];
                for axis in 0..3 {
                    for s in [-1, 1] {
                        let mut o = [0; 3];
                        o[axis] = s;
                        w.push((o, 0.125));
                    }
                }
                (3, 1, Shape::Star, w)
            }
            Preset::ThreeD27P => {
                let row = [0.25, 0.5, 0.25];
                let mut w = Vec::with_capacity(27);
                for a in -1..=1isize {
                    for b in -1..=1isize {
                        for c in -1..=1isize {
                            let v = row[(a + 1) as usize] * row[(b + 1) as usize] * row[(c + 1) as usize];
                            w.push(([a, b, c], v));
                        }
                    }
                }
                (3, 1, Shape::Box, w)
            }
        };
        Self::new(preset.label(), d, r, shape, weights).expect("presets are well formed")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Spatial dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Order: largest per-axis neighbor distance.
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn weights(&self) -> &[(Offset, f64)] {
        &self.weights
    }

    /// Multiplies plus adds of one point update.
    pub fn flops_per_point(&self) -> usize {
        2 * self.weights.len() - 1
    }
}

/// Looks up a preset by its label.
pub fn make_stencil_spec(name: &str) -> Result<StencilSpec> {
    name.parse::<Preset>().map(StencilSpec::preset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_shapes() {
        let s = make_stencil_spec("1d3p").unwrap();
        assert_eq!((s.d(), s.r(), s.shape(), s.weights().len()), (1, 1, Shape::Star, 3));
        let s = make_stencil_spec("3d27p").unwrap();
        assert_eq!((s.d(), s.r(), s.shape(), s.weights().len()), (3, 1, Shape::Box, 27));
        let s = make_stencil_spec("1d5p").unwrap();
        let offs: Vec<isize> = s.weights().iter().map(|(o, _)| o[0]).collect();
        assert_eq!(offs, vec![-2, -1, 0, 1, 2]);
    }

    #[test]
    fn unknown_preset_names_the_input() {
        let err = make_stencil_spec("4d81p").unwrap_err();
        assert!(err.to_string().contains("4d81p"));
    }

    #[test]
    fn weight_counts_and_normalization() {
        for p in Preset::ALL {
            let s = StencilSpec::preset(p);
            let expected = match s.shape() {
                Shape::Star => 2 * s.d() * s.r() + 1,
                Shape::Box => (2 * s.r() + 1).pow(s.d() as u32),
            };
            assert_eq!(s.weights().len(), expected, "{p}");
            let sum: f64 = s.weights().iter().map(|w| w.1).sum();
            assert_eq!(sum, 1.0, "{p}");
            assert_eq!(s.flops_per_point(), 2 * s.weights().len() - 1);
            // symmetric
            for (o, w) in s.weights() {
                let neg = [-o[0], -o[1], -o[2]];
                let mirror = s.weights().iter().find(|(m, _)| *m == neg).unwrap();
                assert_eq!(mirror.1, *w);
            }
        }
    }

    #[test]
    fn flops() {
        assert_eq!(make_stencil_spec("1d3p").unwrap().flops_per_point(), 5);
        assert_eq!(make_stencil_spec("2d5p").unwrap().flops_per_point(), 9);
        assert_eq!(make_stencil_spec("3d27p").unwrap().flops_per_point(), 53);
    }

    #[test]
    fn rejects_malformed_tables() {
        let star_diag = vec![([0, 0, 0], 0.5), ([1, 1, 0], 0.5)];
        assert!(StencilSpec::new("x", 2, 1, Shape::Star, star_diag).is_err());
        let no_center = vec![([-1, 0, 0], 0.5), ([1, 0, 0], 0.5), ([2, 0, 0], 0.0)];
        assert!(StencilSpec::new("x", 1, 1, Shape::Star, no_center).is_err());
    }
}
