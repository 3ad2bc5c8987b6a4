//! Layer geometry. Every layer uses valid padding and pooling floors.

use crate::error::{Error, Result};

pub const IN_CHANNELS: usize = 3;
pub const KERNEL: usize = 5;
pub const CONV1_STRIDE: usize = 4;
pub const POOL: usize = 2;

pub const PUBLISHED_FILTERS: usize = 100;
pub const PUBLISHED_FC_UNITS: usize = 500;

/// Parameter totals the published architecture must reproduce.
pub const fn expected_param_count(input: usize) -> Option<usize> {
    match input {
        64 => Some(708_701),
        128 => Some(6_308_701),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arch {
    pub input: usize,
    pub filters1: usize,
    pub filters2: usize,
    pub fc_units: usize,
}

/// The four weighted layers, in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    Conv1,
    Conv2,
    Fc1,
    Fc2,
}

impl Layer {
    pub const ALL: [Layer; 4] = [Layer::Conv1, Layer::Conv2, Layer::Fc1, Layer::Fc2];

    pub fn name(self) -> &'static str {
        match self {
            Layer::Conv1 => "conv1",
            Layer::Conv2 => "conv2",
            Layer::Fc1 => "fc1",
            Layer::Fc2 => "fc2",
        }
    }
}

impl Arch {
    pub fn published(input: usize) -> Result<Self> {
        Self::with_widths(
            input,
            PUBLISHED_FILTERS,
            PUBLISHED_FILTERS,
            PUBLISHED_FC_UNITS,
        )
    }

    /// Same topology with 10 filters per conv layer and 50 fc units.
    pub fn shrunken(input: usize) -> Result<Self> {
        Self::with_widths(input, 10, 10, 50)
    }

    pub fn with_widths(
        input: usize,
        filters1: usize,
        filters2: usize,
        fc_units: usize,
    ) -> Result<Self> {
        if input != 64 && input != 128 {
            return Err(Error::ShapeMismatch(format!(
                "input size {input} is not 64 or 128"
            )));
        }
        if filters1 == 0 || filters2 == 0 || fc_units == 0 {
            return Err(Error::ShapeMismatch("layer width of zero".into()));
        }
        Ok(Arch {
            input,
            filters1,
            filters2,
            fc_units,
        })
    }

    pub fn is_published(&self) -> bool {
        self.filters1 == PUBLISHED_FILTERS
            && self.filters2 == PUBLISHED_FILTERS
            && self.fc_units == PUBLISHED_FC_UNITS
    }

    pub fn conv1_out(&self) -> usize {
        (self.input - KERNEL) / CONV1_STRIDE + 1
    }

    pub fn pool_out(&self) -> usize {
        self.conv1_out() / POOL
    }

    pub fn conv2_out(&self) -> usize {
        self.pool_out() - KERNEL + 1
    }

    pub fn flat(&self) -> usize {
        self.conv2_out() * self.conv2_out() * self.filters2
    }

    pub fn input_len(&self) -> usize {
        self.input * self.input * IN_CHANNELS
    }

    /// Rows of the im2col matrix of conv1 / conv2.
    pub fn k1(&self) -> usize {
        KERNEL * KERNEL * IN_CHANNELS
    }

    pub fn k2(&self) -> usize {
        KERNEL * KERNEL * self.filters1
    }

    /// Activation shapes (height, width, channels) after conv1, pool, conv2,
    /// then the fc1 and output widths.
    pub fn shapes(&self) -> ([(usize, usize, usize); 3], usize, usize) {
        let c1 = self.conv1_out();
        let p = self.pool_out();
        let c2 = self.conv2_out();
        (
            [
                (c1, c1, self.filters1),
                (p, p, self.filters1),
                (c2, c2, self.filters2),
            ],
            self.fc_units,
            1,
        )
    }

    /// (weight count, bias count) of a layer.
    pub fn layer_sizes(&self, layer: Layer) -> (usize, usize) {
        match layer {
            Layer::Conv1 => (self.k1() * self.filters1, self.filters1),
            Layer::Conv2 => (self.k2() * self.filters2, self.filters2),
            Layer::Fc1 => (self.flat() * self.fc_units, self.fc_units),
            Layer::Fc2 => (self.fc_units, 1),
        }
    }

    pub fn fan_in(&self, layer: Layer) -> usize {
        match layer {
            Layer::Conv1 => self.k1(),
            Layer::Conv2 => self.k2(),
            Layer::Fc1 => self.flat(),
            Layer::Fc2 => self.fc_units,
        }
    }

    pub fn param_count(&self) -> usize {
        Layer::ALL
            .iter()
            .map(|&l| {
                let (w, b) = self.layer_sizes(l);
                w + b
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_for_both_inputs() {
        let a = Arch::published(128).unwrap();
        assert_eq!(
            a.shapes(),
            ([(31, 31, 100), (15, 15, 100), (11, 11, 100)], 500, 1)
        );
        let a = Arch::published(64).unwrap();
        assert_eq!(
            a.shapes(),
            ([(15, 15, 100), (7, 7, 100), (3, 3, 100)], 500, 1)
        );
    }

    #[test]
    fn published_parameter_counts_match() {
        for input in [64, 128] {
            assert_eq!(
                Some(Arch::published(input).unwrap().param_count()),
                expected_param_count(input)
            );
        }
    }

    #[test]
    fn rejects_other_sizes() {
        assert!(Arch::published(96).is_err());
        assert!(Arch::with_widths(64, 0, 1, 1).is_err());
    }
}
