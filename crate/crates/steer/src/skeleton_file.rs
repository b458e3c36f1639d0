//! Human-readable skeleton description.
//!
//! ```text
//! steer-skeleton 1
//! # comments and blank lines are ignored
//! name biped5
//! joint <name> <parent name or -> <axis x y z> <offset x y z>
//! ankles <left joint> <right joint>
//! mirror <joint> <source joint> <+1|-1>
//! ```
//!
//! Joints are listed parent-first; the offset is the joint's link origin in
//! its parent link frame, in metres. `mirror` lines are optional but, when
//! present, must cover every joint: mirroring sets
//! `q'[joint] = sign * q[source]`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use steer_core::kinematics::builtin::{biped5, humanoid29};
use steer_core::kinematics::{Joint, MirrorEntry};
use steer_core::SkeletonSpec;

use crate::error::{Error, Result};

pub const SKELETON_MAGIC: &str = "steer-skeleton";
pub const SKELETON_VERSION: u32 = 1;

const WHAT: &str = "skeleton file";

pub fn parse_skeleton(text: &str) -> Result<SkeletonSpec> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (n, header) = lines.next().ok_or_else(|| Error::parse(WHAT, 1, "empty file"))?;
    let mut h = header.split_whitespace();
    if h.next() != Some(SKELETON_MAGIC) {
        return Err(Error::parse(WHAT, n, format!("expected header {SKELETON_MAGIC:?}")));
    }
    let version = h.next().unwrap_or("");
    if version != SKELETON_VERSION.to_string() {
        return Err(Error::Version {
            what: WHAT,
            found: version.into(),
            expected: SKELETON_VERSION.to_string(),
        });
    }
    let mut name = None;
    let mut joints: Vec<Joint> = Vec::new();
    let mut by_name: HashMap<String, usize> = HashMap::new();
    let mut ankles = None;
    let mut mirror: Vec<(usize, String, String, f64)> = Vec::new();
    for (n, line) in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(WHAT, n, format!("invalid number {s:?}")))
        };
        match tok[0] {
            "name" if tok.len() == 2 => name = Some(tok[1].to_string()),
            "joint" if tok.len() == 9 => {
                let parent = match tok[2] {
                    "-" => None,
                    p => Some(
                        *by_name
                            .get(p)
                            .ok_or_else(|| Error::parse(WHAT, n, format!("unknown parent {p:?}")))?,
                    ),
                };
                if by_name.contains_key(tok[1]) {
                    return Err(Error::parse(WHAT, n, format!("duplicate joint {:?}", tok[1])));
                }
                by_name.insert(tok[1].into(), joints.len());
                joints.push(Joint {
                    name: tok[1].into(),
                    parent,
                    axis: [num(tok[3])?, num(tok[4])?, num(tok[5])?],
                    offset: [num(tok[6])?, num(tok[7])?, num(tok[8])?],
                });
            }
            "ankles" if tok.len() == 3 => {
                let find = |s: &str| {
                    by_name
                        .get(s)
                        .copied()
                        .ok_or_else(|| Error::parse(WHAT, n, format!("unknown joint {s:?}")))
                };
                ankles = Some((find(tok[1])?, find(tok[2])?));
            }
            "mirror" if tok.len() == 4 => {
                let sign = num(tok[3])?;
                mirror.push((n, tok[1].into(), tok[2].into(), sign));
            }
            _ => return Err(Error::parse(WHAT, n, format!("unrecognised record {line:?}"))),
        }
    }
    let name = name.ok_or_else(|| Error::format(WHAT, "missing name record"))?;
    let ankles = ankles.ok_or_else(|| Error::format(WHAT, "missing ankles record"))?;
    let mirror = if mirror.is_empty() {
        None
    } else {
        let mut entries: Vec<Option<MirrorEntry>> = vec![None; joints.len()];
        for (n, j, s, sign) in mirror {
            let (Some(&j), Some(&s)) = (by_name.get(&j), by_name.get(&s)) else {
                return Err(Error::parse(WHAT, n, "mirror record names an unknown joint"));
            };
            if entries[j].replace(MirrorEntry { source: s, sign }).is_some() {
                return Err(Error::parse(WHAT, n, "joint mirrored twice"));
            }
        }
        Some(
            entries
                .into_iter()
                .enumerate()
                .map(|(i, e)| e.ok_or_else(|| Error::format(WHAT, format!("no mirror record for joint {i}"))))
                .collect::<Result<Vec<_>>>()?,
        )
    };
    Ok(SkeletonSpec::new(name, joints, ankles, mirror)?)
}

pub fn write_skeleton(s: &SkeletonSpec) -> String {
    let mut out = format!("{SKELETON_MAGIC} {SKELETON_VERSION}\nname {}\n", s.name);
    for j in &s.joints {
        let parent = j.parent.map_or("-", |p| s.joints[p].name.as_str());
        let [ax, ay, az] = j.axis;
        let [ox, oy, oz] = j.offset;
        let _ = writeln!(out, "joint {} {parent} {ax:?} {ay:?} {az:?} {ox:?} {oy:?} {oz:?}", j.name);
    }
    let _ = writeln!(out, "ankles {} {}", s.joints[s.ankles.0].name, s.joints[s.ankles.1].name);
    if let Some(m) = &s.mirror {
        for (j, e) in s.joints.iter().zip(m) {
            let _ = writeln!(out, "mirror {} {} {:+}", j.name, s.joints[e.source].name, e.sign);
        }
    }
    out
}

/// Loads a skeleton from a file, or a built-in one named `builtin:humanoid29`
/// or `builtin:biped5`.
pub fn load_skeleton(spec: &str) -> Result<SkeletonSpec> {
    match spec {
        "builtin:humanoid29" => Ok(humanoid29()),
        "builtin:biped5" => Ok(biped5()),
        s if s.starts_with("builtin:") => Err(Error::format(WHAT, format!("unknown built-in skeleton {s:?}"))),
        path => parse_skeleton(&std::fs::read_to_string(Path::new(path))?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_round_trip() {
        for s in [humanoid29(), biped5()] {
            let text = write_skeleton(&s);
            let back = parse_skeleton(&text).unwrap();
            assert_eq!(back, s);
            assert_eq!(back.fingerprint(), s.fingerprint());
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_skeleton("steer-skeleton 2\n"), Err(Error::Version { .. })));
        assert!(parse_skeleton("").is_err());
        let bad_parent = "steer-skeleton 1\nname x\njoint a b 0 0 1 0 0 0\n";
        assert!(matches!(parse_skeleton(bad_parent), Err(Error::Parse { line: 3, .. })));
        let no_ankles = "steer-skeleton 1\nname x\njoint a - 0 0 1 0 0 0\n";
        assert!(parse_skeleton(no_ankles).is_err());
        let bad_axis = "steer-skeleton 1\nname x\njoint a - 0 0 2 0 0 0\nankles a a\n";
        assert!(matches!(parse_skeleton(bad_axis), Err(Error::Core(_))));
    }

    #[test]
    fn comments_are_ignored() {
        let text = "# leading\nsteer-skeleton 1 # trailing\n\nname one\njoint a - 0 0 1 0 0 0\nankles a a\n";
        let s = parse_skeleton(text).unwrap();
        assert_eq!(s.n_q(), 1);
        assert!(s.mirror.is_none());
    }
}
