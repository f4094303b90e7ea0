//! Plain-text record streams for maps and weights.
//!
//! Voxel map:
//! ```text
//! # voxel-map v1
//! resolution 0.05
//! origin -1.5 -1 -0.5
//! bounds 110 40 40
//! 3 4 5 terrain
//! ```
//! Positional weights are `x y z w` records, action weights
//! `x y z dx dy dz w`, each stream opened by its own `# ... v1` line.
//! Floats are printed in shortest round-trip form, so parsing an export
//! reproduces the map exactly.

use super::{Action, CellTag, DiscreteState, VoxelMap, WeightMaps};
use crate::geometry::Vec3;
use std::fmt::Write as _;
use thiserror::Error;

pub const VOXEL_HEADER: &str = "# voxel-map v1";
pub const POSITIONAL_HEADER: &str = "# positional-weights v1";
pub const ACTION_HEADER: &str = "# action-weights v1";

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("missing `{0}` header")]
    MissingHeader(&'static str),
    #[error(transparent)]
    Map(#[from] super::MapError),
}

fn bad(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Line {
        line: line + 1,
        msg: msg.into(),
    }
}

pub fn voxel_map_to_text(map: &VoxelMap) -> String {
    let mut out = String::new();
    let o = map.origin();
    let [nx, ny, nz] = map.dims();
    let _ = writeln!(out, "{VOXEL_HEADER}");
    let _ = writeln!(out, "resolution {}", map.resolution());
    let _ = writeln!(out, "origin {} {} {}", o.x, o.y, o.z);
    let _ = writeln!(out, "bounds {nx} {ny} {nz}");
    for (q, tag) in map.occupied() {
        let _ = writeln!(out, "{} {} {} {}", q.x, q.y, q.z, tag.as_str());
    }
    out
}

fn fields<const N: usize>(line: usize, s: &str) -> Result<[&str; N], ParseError> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    parts
        .try_into()
        .map_err(|p: Vec<&str>| bad(line, format!("expected {N} fields, found {}", p.len())))
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, ParseError> {
    s.parse()
        .map_err(|_| bad(line, format!("cannot parse `{s}`")))
}

pub fn voxel_map_from_text(text: &str) -> Result<VoxelMap, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == VOXEL_HEADER => {}
        _ => return Err(ParseError::MissingHeader(VOXEL_HEADER)),
    }
    let mut header = |key: &str| -> Result<(usize, Vec<String>), ParseError> {
        let (i, l) = lines
            .next()
            .ok_or_else(|| bad(0, format!("missing `{key}`")))?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(bad(i, format!("expected `{key}`")));
        }
        Ok((i, parts.map(str::to_owned).collect()))
    };
    let (i, r) = header("resolution")?;
    let resolution: f64 = num(i, r.first().map_or("", String::as_str))?;
    let (i, o) = header("origin")?;
    if o.len() != 3 {
        return Err(bad(i, "origin needs 3 values"));
    }
    let origin = Vec3::new(num(i, &o[0])?, num(i, &o[1])?, num(i, &o[2])?);
    let (i, b) = header("bounds")?;
    if b.len() != 3 {
        return Err(bad(i, "bounds needs 3 values"));
    }
    let dims = [num(i, &b[0])?, num(i, &b[1])?, num(i, &b[2])?];
    let mut map = VoxelMap::new(resolution, origin, dims)?;
    for (i, l) in lines {
        let [x, y, z, tag] = fields::<4>(i, l)?;
        let tag = match tag {
            "terrain" => CellTag::Terrain,
            "user_virtual" => CellTag::UserVirtual,
            other => return Err(bad(i, format!("unknown tag `{other}`"))),
        };
        map.set(
            DiscreteState::new(num(i, x)?, num(i, y)?, num(i, z)?),
            Some(tag),
        )?;
    }
    Ok(map)
}

pub fn positional_weights_to_text(weights: &WeightMaps) -> String {
    let mut out = format!("{POSITIONAL_HEADER}\n");
    for (q, w) in weights.positional.iter() {
        let _ = writeln!(out, "{} {} {} {}", q.x, q.y, q.z, w);
    }
    out
}

pub fn action_weights_to_text(weights: &WeightMaps) -> String {
    let mut out = format!("{ACTION_HEADER}\n");
    for (q, a, w) in weights.action.iter() {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            q.x, q.y, q.z, a.dx, a.dy, a.dz, w
        );
    }
    out
}

pub fn positional_weights_from_text(text: &str) -> Result<Vec<(DiscreteState, f64)>, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    if lines.next().map(|(_, l)| l.trim()) != Some(POSITIONAL_HEADER) {
        return Err(ParseError::MissingHeader(POSITIONAL_HEADER));
    }
    lines
        .map(|(i, l)| {
            let [x, y, z, w] = fields::<4>(i, l)?;
            Ok((
                DiscreteState::new(num(i, x)?, num(i, y)?, num(i, z)?),
                num(i, w)?,
            ))
        })
        .collect()
}

pub fn action_weights_from_text(
    text: &str,
) -> Result<Vec<(DiscreteState, Action, f64)>, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    if lines.next().map(|(_, l)| l.trim()) != Some(ACTION_HEADER) {
        return Err(ParseError::MissingHeader(ACTION_HEADER));
    }
    lines
        .map(|(i, l)| {
            let [x, y, z, dx, dy, dz, w] = fields::<7>(i, l)?;
            let a = Action::new(num(i, dx)?, num(i, dy)?, num(i, dz)?)
                .ok_or_else(|| bad(i, "invalid action"))?;
            Ok((
                DiscreteState::new(num(i, x)?, num(i, y)?, num(i, z)?),
                a,
                num(i, w)?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn voxel_round_trip() {
        let map = VoxelMap::from_cells(
            0.05,
            Vec3::new(-0.35, 0.1, -1.0 / 3.0),
            [10, 8, 6],
            [
                (DiscreteState::new(0, 0, 0), CellTag::Terrain),
                (DiscreteState::new(9, 7, 5), CellTag::UserVirtual),
            ],
        )
        .unwrap();
        let text = voxel_map_to_text(&map);
        assert!(text.contains("9 7 5 user_virtual"));
        assert_eq!(voxel_map_from_text(&text).unwrap(), map);
    }

    #[test]
    fn weight_streams_round_trip() {
        let mut w = WeightMaps::new();
        let q = DiscreteState::new(-1, 2, 3);
        let a = Action::new(1, 0, -1).unwrap();
        w.add_positional_weight(q, 0.1 + 0.2).unwrap();
        w.add_action_weight(q, a, 1.0 / 3.0).unwrap();
        assert_eq!(
            positional_weights_from_text(&positional_weights_to_text(&w)).unwrap(),
            vec![(q, 0.1 + 0.2)]
        );
        assert_eq!(
            action_weights_from_text(&action_weights_to_text(&w)).unwrap(),
            vec![(q, a, 1.0 / 3.0)]
        );
    }

    #[test]
    fn rejects_bad_records() {
        assert!(voxel_map_from_text("resolution 1").is_err());
        let t =
            format!("{VOXEL_HEADER}\nresolution 1\norigin 0 0 0\nbounds 2 2 2\n5 5 5 terrain\n");
        assert!(voxel_map_from_text(&t).is_err());
        let t = format!("{ACTION_HEADER}\n0 0 0 0 0 0 1\n");
        assert!(action_weights_from_text(&t).is_err());
    }
}
