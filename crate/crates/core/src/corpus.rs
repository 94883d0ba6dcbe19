//! The two bundled example models.

use crate::lts::parse_named;
use crate::model::ModelSpec;

pub const MALWARE_SOURCE: &str = include_str!("../models/malware.lts");
pub const ICU_SOURCE: &str = include_str!("../models/icu.lts");

pub fn malware() -> ModelSpec {
    parse_named("malware", MALWARE_SOURCE).expect("bundled malware model parses")
}

pub fn icu() -> ModelSpec {
    parse_named("icu", ICU_SOURCE).expect("bundled icu model parses")
}
