//! Plain-text policy files.
//!
//! ```text
//! uasnav-policy v1; goal=5,5; cols=10; rows=10
//! 0,0,forward
//! 1,0,forward
//! ...
//! ```
//!
//! One `col,row,action` line per non-goal landmark, in flat-index order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Action, LandmarkId};

use super::table::PolicyTable;

pub const POLICY_FORMAT_VERSION: &str = "v1";
const MAGIC: &str = "uasnav-policy";

pub fn policy_to_string(policy: &PolicyTable) -> String {
    let goal = policy.goal();
    let mut out = format!(
        "{MAGIC} {POLICY_FORMAT_VERSION}; goal={},{}; cols={}; rows={}\n",
        goal.col,
        goal.row,
        policy.cols(),
        policy.rows()
    );
    for (s, a) in policy.entries() {
        out.push_str(&format!("{},{},{}\n", s.col, s.row, a));
    }
    out
}

pub fn save_policy(policy: &PolicyTable, path: &Path) -> Result<()> {
    std::fs::write(path, policy_to_string(policy)).map_err(|e| Error::io(path, e))
}

pub fn load_policy(path: &Path) -> Result<PolicyTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_policy(&text, &path.display().to_string())
}

fn header_field<'a>(field: &'a str, key: &str, name: &str) -> Result<&'a str> {
    field
        .trim()
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| Error::parse(name, 1, format!("expected '{key}=...' in header, found '{}'", field.trim())))
}

fn parse_usize(s: &str, what: &str, name: &str, line: usize) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(name, line, format!("invalid {what} '{}'", s.trim())))
}

/// Parses a policy file. `name` labels errors.
pub fn parse_policy(text: &str, name: &str) -> Result<PolicyTable> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(name, 1, "empty policy file"))?;

    let mut fields = header.split(';');
    let magic = fields.next().unwrap_or_default().trim();
    let version = magic
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| Error::parse(name, 1, format!("missing '{MAGIC}' header")))?;
    if version != POLICY_FORMAT_VERSION {
        return Err(Error::Version {
            expected: POLICY_FORMAT_VERSION.into(),
            found: version.into(),
        });
    }
    let goal_field = header_field(fields.next().unwrap_or_default(), "goal", name)?;
    let cols = parse_usize(header_field(fields.next().unwrap_or_default(), "cols", name)?, "cols", name, 1)?;
    let rows = parse_usize(header_field(fields.next().unwrap_or_default(), "rows", name)?, "rows", name, 1)?;
    if fields.next().is_some() {
        return Err(Error::parse(name, 1, "unexpected trailing header field"));
    }
    let (gc, gr) = goal_field
        .split_once(',')
        .ok_or_else(|| Error::parse(name, 1, "goal must be '<col>,<row>'"))?;
    let goal = LandmarkId {
        col: parse_usize(gc, "goal column", name, 1)?,
        row: parse_usize(gr, "goal row", name, 1)?,
    };
    if cols < 2 || rows < 2 || goal.col >= cols || goal.row >= rows {
        return Err(Error::parse(name, 1, "goal outside the declared grid"));
    }

    let mut actions: Vec<Option<Action>> = vec![None; cols * rows];
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::parse(name, lineno, "expected 'col,row,action'"));
        }
        let col = parse_usize(parts[0], "col", name, lineno)?;
        let row = parse_usize(parts[1], "row", name, lineno)?;
        let action: Action = parts[2]
            .trim()
            .parse()
            .map_err(|e: String| Error::parse(name, lineno, e))?;
        if col >= cols || row >= rows {
            return Err(Error::parse(name, lineno, format!("landmark ({col}, {row}) outside the grid")));
        }
        if (LandmarkId { col, row }) == goal {
            return Err(Error::parse(name, lineno, "the goal landmark must not carry an action"));
        }
        let slot = &mut actions[row * cols + col];
        if slot.is_some() {
            return Err(Error::parse(name, lineno, format!("duplicate entry for ({col}, {row})")));
        }
        *slot = Some(action);
    }

    for (i, a) in actions.iter().enumerate() {
        let id = LandmarkId {
            col: i % cols,
            row: i / cols,
        };
        if a.is_none() && id != goal {
            return Err(Error::IncompletePolicy(id));
        }
    }
    Ok(PolicyTable::from_parts(cols, rows, goal, actions))
}
