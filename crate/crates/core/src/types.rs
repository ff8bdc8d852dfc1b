use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Writing-surface material, the classification target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    Parchment,
    Papyrus,
}

impl Material {
    pub const ALL: [Material; 2] = [Material::Parchment, Material::Papyrus];

    /// Row/column position in confusion matrices.
    pub fn index(self) -> usize {
        match self {
            Material::Parchment => 0,
            Material::Papyrus => 1,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Material::Parchment => "Parchment",
            Material::Papyrus => "Papyrus",
        }
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Material::Parchment => "parchment",
            Material::Papyrus => "papyrus",
        })
    }
}

impl FromStr for Material {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "parchment" => Ok(Material::Parchment),
            "papyrus" => Ok(Material::Papyrus),
            other => Err(Error::Invalid(format!("unknown material '{other}'"))),
        }
    }
}

/// Image set a fragment photograph belongs to; sets are evaluated independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageSet {
    Color,
    Multispectral,
}

impl ImageSet {
    pub const ALL: [ImageSet; 2] = [ImageSet::Color, ImageSet::Multispectral];

    pub fn title(self) -> &'static str {
        match self {
            ImageSet::Color => "Color",
            ImageSet::Multispectral => "Multispectral",
        }
    }
}

impl fmt::Display for ImageSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImageSet::Color => "color",
            ImageSet::Multispectral => "multispectral",
        })
    }
}

impl FromStr for ImageSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "color" | "colour" => Ok(ImageSet::Color),
            "multispectral" | "ms" => Ok(ImageSet::Multispectral),
            other => Err(Error::Invalid(format!("unknown image set '{other}'"))),
        }
    }
}
