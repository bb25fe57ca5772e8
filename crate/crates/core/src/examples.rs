//! The four bundled instances, compiled into the binary.

use crate::model::Problem;
use crate::schema::{parse_problem_str, ProblemFile};

pub const E1_SOURCE: &str = include_str!("../problems/e1.opt");
pub const E2_SOURCE: &str = include_str!("../problems/e2.opt");
pub const E3_SOURCE: &str = include_str!("../problems/e3.opt");
pub const E4_SOURCE: &str = include_str!("../problems/e4.opt");

pub const ALL: [(&str, &str); 4] = [("e1", E1_SOURCE), ("e2", E2_SOURCE), ("e3", E3_SOURCE), ("e4", E4_SOURCE)];

/// Looks up a bundled file by name, with or without the `.opt` suffix.
pub fn bundled(name: &str) -> Option<ProblemFile> {
    let key = name.strip_suffix(".opt").unwrap_or(name);
    ALL.iter()
        .find(|(n, _)| *n == key)
        .map(|(_, src)| parse_problem_str(src).expect("bundled files are valid"))
}

fn load(name: &str) -> Problem {
    bundled(name).expect("bundled example").problem
}

pub fn e1() -> Problem {
    load("e1")
}

pub fn e2() -> Problem {
    load("e2")
}

pub fn e3() -> Problem {
    load("e3")
}

pub fn e4() -> Problem {
    load("e4")
}
