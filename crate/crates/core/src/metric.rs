use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Full-reference quality metric a model is trained to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Metric {
    Psnr,
    Ssim,
    Vmaf,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Psnr, Metric::Ssim, Metric::Vmaf];

    /// Inclusive valid range; PSNR is unbounded above.
    pub fn range(self) -> (f64, f64) {
        match self {
            Metric::Psnr => (0.0, f64::INFINITY),
            Metric::Ssim => (0.0, 1.0),
            Metric::Vmaf => (0.0, 100.0),
        }
    }

    pub fn clamp(self, value: f64) -> f64 {
        let (lo, hi) = self.range();
        value.max(lo).min(hi)
    }

    pub fn contains(self, value: f64) -> bool {
        let (lo, hi) = self.range();
        value.is_finite() && value >= lo && value <= hi
    }

    pub fn unit(self) -> &'static str {
        match self {
            Metric::Psnr => "dB",
            Metric::Ssim | Metric::Vmaf => "",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Psnr => "PSNR",
            Metric::Ssim => "SSIM",
            Metric::Vmaf => "VMAF",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PSNR" => Ok(Metric::Psnr),
            "SSIM" => Ok(Metric::Ssim),
            "VMAF" => Ok(Metric::Vmaf),
            other => Err(Error::parse(format!("unknown metric `{other}`"))),
        }
    }
}
