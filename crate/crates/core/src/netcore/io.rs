//! `edge-list-v1` and `anchors-v1` text formats.
//!
//! edge-list-v1 is UTF-8, line oriented and whitespace separated:
//!
//! ```text
//! # comment
//! U <user-id>
//! P <post-id> <author-user-id>
//! F <follower> <followee>
//! AW <post-id> <word>
//! AT <post-id> <unix-seconds>
//! AL <post-id> <location-id>
//! ```
//!
//! Declarations may appear in any order: users are resolved first, then
//! posts, then links and attributes. Indices follow first appearance.
//!
//! anchors-v1 is one `<emerging-user-id> <mature-user-id>` pair per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{AlignedPair, HeterogeneousNetwork, NetworkBuilder, TimeBucketing};
use crate::error::{Error, Result};

enum Record<'a> {
    User(&'a str),
    Post(&'a str, &'a str),
    Follow(&'a str, &'a str),
    Word(&'a str, &'a str),
    Time(&'a str, i64),
    Location(&'a str, &'a str),
}

fn parse_record(line: &str, lineno: usize) -> Result<Option<Record<'_>>> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let fields: Vec<&str> = trimmed.split_whitespace().collect();
    let arity = |n: usize| -> Result<()> {
        if fields.len() == n {
            Ok(())
        } else {
            Err(Error::Parse {
                line: lineno,
                msg: format!(
                    "`{}` record takes {} fields, found {}",
                    fields[0],
                    n - 1,
                    fields.len() - 1
                ),
            })
        }
    };
    let rec = match fields[0] {
        "U" => {
            arity(2)?;
            Record::User(fields[1])
        }
        "P" => {
            arity(3)?;
            Record::Post(fields[1], fields[2])
        }
        "F" => {
            arity(3)?;
            Record::Follow(fields[1], fields[2])
        }
        "AW" => {
            arity(3)?;
            Record::Word(fields[1], fields[2])
        }
        "AT" => {
            arity(3)?;
            let secs = fields[2].parse::<i64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid timestamp `{}`", fields[2]),
            })?;
            Record::Time(fields[1], secs)
        }
        "AL" => {
            arity(3)?;
            Record::Location(fields[1], fields[2])
        }
        other => {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("unknown record type `{other}`"),
            })
        }
    };
    Ok(Some(rec))
}

/// Parses an edge-list-v1 document.
pub fn parse_network(text: &str, bucketing: TimeBucketing) -> Result<HeterogeneousNetwork> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(rec) = parse_record(line, i + 1)? {
            records.push((i + 1, rec));
        }
    }

    let mut b = NetworkBuilder::new(bucketing);
    for (line, rec) in &records {
        if let Record::User(id) = rec {
            b.add_user(id, *line)?;
        }
    }
    for (line, rec) in &records {
        if let Record::Post(id, author) = rec {
            b.add_post(id, author, *line)?;
        }
    }
    for (line, rec) in &records {
        match *rec {
            Record::Follow(u, v) => b.add_follow(u, v, *line)?,
            Record::Word(p, w) => b.add_word(p, w, *line)?,
            Record::Time(p, t) => b.add_timestamp(p, t, *line)?,
            Record::Location(p, l) => b.add_location(p, l, *line)?,
            Record::User(_) | Record::Post(..) => {}
        }
    }
    Ok(b.build())
}

pub fn load_network(path: impl AsRef<Path>, bucketing: TimeBucketing) -> Result<HeterogeneousNetwork> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_network(&text, bucketing)
}

/// Canonical edge-list-v1 rendering: records grouped by type, each group
/// sorted by id.
pub fn serialize_network(net: &HeterogeneousNetwork) -> String {
    let mut out = String::new();
    let uid = |i: usize| net.user_id(i);

    let mut users: Vec<&str> = net.users().names().iter().map(String::as_str).collect();
    users.sort_unstable();
    for u in users {
        let _ = writeln!(out, "U {u}");
    }

    let mut posts: Vec<usize> = (0..net.n_posts()).collect();
    posts.sort_by(|&a, &b| net.posts().name(a).cmp(net.posts().name(b)));
    for &p in &posts {
        let _ = writeln!(out, "P {} {}", net.posts().name(p), uid(net.post_authors()[p]));
    }

    let mut follows: Vec<(&str, &str)> = net.follows().iter().map(|&(u, v)| (uid(u), uid(v))).collect();
    follows.sort_unstable();
    for (u, v) in follows {
        let _ = writeln!(out, "F {u} {v}");
    }

    let mut attrs: Vec<(&str, u8, String)> = Vec::new();
    for &p in &posts {
        let pid = net.posts().name(p);
        let a = &net.post_attrs()[p];
        attrs.extend(a.words.iter().map(|&w| (pid, 0, net.words().name(w).to_owned())));
        attrs.extend(a.timestamps.iter().map(|&t| (pid, 1, t.to_string())));
        attrs.extend(a.locations.iter().map(|&l| (pid, 2, net.locations().name(l).to_owned())));
    }
    attrs.sort();
    for (pid, kind, value) in attrs {
        let tag = ["AW", "AT", "AL"][kind as usize];
        let _ = writeln!(out, "{tag} {pid} {value}");
    }
    out
}

pub fn write_network(net: &HeterogeneousNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, serialize_network(net)).map_err(|e| Error::file(path, e))
}

/// Parses anchors-v1 text against two already-loaded networks.
pub fn parse_anchors(
    text: &str,
    emerging: HeterogeneousNetwork,
    mature: HeterogeneousNetwork,
) -> Result<AlignedPair> {
    let mut anchors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("anchor line needs 2 fields, found {}", fields.len()),
            });
        }
        let a = emerging.user_index(fields[0]).ok_or_else(|| Error::UnknownUser {
            side: "emerging",
            id: fields[0].to_owned(),
        })?;
        let b = mature.user_index(fields[1]).ok_or_else(|| Error::UnknownUser {
            side: "mature",
            id: fields[1].to_owned(),
        })?;
        anchors.push((a, b));
    }
    AlignedPair::new(emerging, mature, anchors)
}

pub fn load_anchors(
    path: impl AsRef<Path>,
    emerging: HeterogeneousNetwork,
    mature: HeterogeneousNetwork,
) -> Result<AlignedPair> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_anchors(&text, emerging, mature)
}

/// anchors-v1 rendering, sorted by emerging user id.
pub fn serialize_anchors(pair: &AlignedPair) -> String {
    let mut rows: Vec<(&str, &str)> = pair
        .anchors()
        .iter()
        .map(|&(a, b)| (pair.emerging.user_id(a), pair.mature.user_id(b)))
        .collect();
    rows.sort_unstable();
    let mut out = String::new();
    for (a, b) in rows {
        let _ = writeln!(out, "{a} {b}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<HeterogeneousNetwork> {
        parse_network(text, TimeBucketing::HourOfWeek)
    }

    #[test]
    fn minimal_network() {
        let net = parse("U a\nU b\nF a b\n").unwrap();
        assert_eq!(net.n_users(), 2);
        assert_eq!(net.follows(), &[(0, 1)]);
    }

    #[test]
    fn undeclared_user_is_dangling() {
        let err = parse("U b\nF a b\n").unwrap_err();
        assert!(matches!(err, Error::DanglingReference { line: 2, .. }), "{err}");
    }

    #[test]
    fn declarations_may_follow_use() {
        let net = parse("F a b\nU b\nU a\n").unwrap();
        // first-appearance order among declarations
        assert_eq!(net.user_id(0), "b");
        assert_eq!(net.follows(), &[(1, 0)]);
    }

    #[test]
    fn duplicate_edge_reports_line() {
        let err = parse("U a\nU b\nF a b\n# again\nF a b\n").unwrap_err();
        assert!(matches!(err, Error::DuplicateEdge { line: 5, .. }), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse("U a\nX a\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse("U a\nP p a\nAT p soon\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse("U a b\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse("U a\nAW p w\n").unwrap_err();
        assert!(matches!(err, Error::DanglingReference { kind: "post", .. }));
    }

    #[test]
    fn canonical_form_is_sorted_and_stable() {
        let text = "U z\nU a\nP p2 z\nP p1 a\nF z a\nF a z\nAL p2 home\nAW p1 tea\nAT p1 7200\n";
        let net = parse(text).unwrap();
        let canon = serialize_network(&net);
        assert_eq!(
            canon,
            "U a\nU z\nP p1 a\nP p2 z\nF a z\nF z a\nAW p1 tea\nAT p1 7200\nAL p2 home\n"
        );
        assert_eq!(serialize_network(&parse(&canon).unwrap()), canon);
    }

    #[test]
    fn anchors_load_and_validate() {
        let g = || parse("U 0\nU 1\nU 2\n").unwrap();
        let pair = parse_anchors("0 0\n", g(), g()).unwrap();
        assert_eq!(pair.anchors(), &[(0, 0)]);

        let err = parse_anchors("0 0\n0 1\n", g(), g()).unwrap_err();
        assert!(matches!(err, Error::NonInjectiveAnchor { .. }));

        let err = parse_anchors("0 7\n", g(), g()).unwrap_err();
        assert!(matches!(err, Error::UnknownUser { side: "mature", .. }));
    }
}
