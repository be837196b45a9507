//! Reclassification of ESA CCI land-cover classes into urbanizable and
//! non-urbanizable land.

use crate::error::{Error, Result};

/// Every known class code with its urbanizable flag, in ascending order.
pub const TABLE: [(i32, bool); 34] = [
    (10, true),
    (11, true),
    (12, true),
    (20, true),
    (30, true),
    (40, true),
    (50, true),
    (60, true),
    (61, true),
    (62, true),
    (70, true),
    (71, true),
    (72, true),
    (80, true),
    (81, true),
    (82, true),
    (90, true),
    (100, true),
    (110, true),
    (120, true),
    (121, true),
    (122, true),
    (130, true),
    (140, true),
    (150, true),
    (160, false),
    (170, false),
    (180, false),
    (190, true),
    (200, true),
    (201, true),
    (202, true),
    (210, false),
    (220, false),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandClass {
    Urbanizable,
    NonUrbanizable,
}

pub fn reclassify(code: i32) -> Result<LandClass> {
    match TABLE.binary_search_by_key(&code, |e| e.0) {
        Ok(i) if TABLE[i].1 => Ok(LandClass::Urbanizable),
        Ok(_) => Ok(LandClass::NonUrbanizable),
        Err(_) => Err(Error::UnknownLandCover {
            code,
            valid: TABLE.iter().map(|e| e.0.to_string()).collect::<Vec<_>>().join(", "),
        }),
    }
}

/// Urbanizable share of a cell from the classes of its sub-pixels.
pub fn land_share(codes: &[i32]) -> Result<f64> {
    if codes.is_empty() {
        return Ok(0.0);
    }
    let mut urban = 0usize;
    for &c in codes {
        if reclassify(c)? == LandClass::Urbanizable {
            urban += 1;
        }
    }
    Ok(urban as f64 / codes.len() as f64)
}
