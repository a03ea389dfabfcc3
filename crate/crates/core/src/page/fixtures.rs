//! The three example pages used to validate the SPR bound.
//!
//! * `p0`: a lone 1 KiB html document.
//! * `p1`: html referencing one 128 KiB image at the end of the document.
//! * `p2`: html referencing an image and a script; the script references a
//!   second image.

use super::{from_page_json, DependencyTree};

pub const P0_JSON: &str = include_str!("../../fixtures/p0.json");
pub const P1_JSON: &str = include_str!("../../fixtures/p1.json");
pub const P2_JSON: &str = include_str!("../../fixtures/p2.json");

pub const NAMES: [&str; 3] = ["p0", "p1", "p2"];

pub fn p0() -> DependencyTree {
    from_page_json(P0_JSON).expect("p0 fixture is valid")
}

pub fn p1() -> DependencyTree {
    from_page_json(P1_JSON).expect("p1 fixture is valid")
}

pub fn p2() -> DependencyTree {
    from_page_json(P2_JSON).expect("p2 fixture is valid")
}

pub fn by_name(name: &str) -> Option<DependencyTree> {
    match name {
        "p0" => Some(p0()),
        "p1" => Some(p1()),
        "p2" => Some(p2()),
        _ => None,
    }
}
