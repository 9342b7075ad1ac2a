//! Line-oriented, tab-separated text formats for lattices and path samples.
//!
//! Lattice: a `horizon<TAB>T` header, then one node per line
//! `id  time  parent|-  prob  key=value ...`.
//!
//! Path sample: `sample<TAB>n<TAB>T<TAB>seed`, a `columns` line of `name:reveal`
//! entries, then one path per line.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scenario::lattice::{Node, ScenarioLattice};
use crate::scenario::paths::{Column, PathSample};

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>().map_err(|e| Error::Parse {
        line,
        msg: format!("{s:?}: {e}"),
    })
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.parse::<usize>().map_err(|e| Error::Parse {
        line,
        msg: format!("{s:?}: {e}"),
    })
}

pub fn write_lattice(l: &ScenarioLattice) -> String {
    let mut out = format!("horizon\t{}\n", l.horizon());
    for (id, n) in l.nodes().iter().enumerate() {
        let parent = n.parent.map_or("-".to_string(), |p| p.to_string());
        let _ = write!(out, "{id}\t{}\t{parent}\t{:?}", n.time, n.prob);
        for (k, v) in &n.payload {
            let _ = write!(out, "\t{k}={v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn read_lattice(text: &str) -> Result<ScenarioLattice> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty input".into(),
    })?;
    let horizon = match head.split('\t').collect::<Vec<_>>().as_slice() {
        ["horizon", t] => parse_usize(t, 1)?,
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "expected horizon header".into(),
            })
        }
    };
    let mut nodes: Vec<Node> = Vec::new();
    for (i, line) in lines {
        let ln = i + 1;
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 4 {
            return Err(Error::Parse {
                line: ln,
                msg: "node line needs id, time, parent, prob".into(),
            });
        }
        let id = parse_usize(f[0], ln)?;
        if id != nodes.len() {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected node id {}", nodes.len()),
            });
        }
        let time = parse_usize(f[1], ln)?;
        let parent = if f[2] == "-" {
            None
        } else {
            Some(parse_usize(f[2], ln)?)
        };
        let prob = parse_f64(f[3], ln)?;
        let mut payload = BTreeMap::new();
        for kv in &f[4..] {
            let (k, v) = kv.split_once('=').ok_or(Error::Parse {
                line: ln,
                msg: format!("bad payload {kv:?}"),
            })?;
            payload.insert(k.to_string(), parse_f64(v, ln)?);
        }
        if let Some(p) = parent {
            if p >= nodes.len() {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("parent {p} not yet defined"),
                });
            }
            nodes[p].children.push(id);
        }
        nodes.push(Node {
            time,
            parent,
            prob,
            children: Vec::new(),
            payload,
        });
    }
    ScenarioLattice::from_nodes(horizon, nodes)
}

pub fn write_paths(s: &PathSample) -> String {
    let mut out = format!("sample\t{}\t{}\t{}\n", s.n_paths, s.horizon, s.seed);
    out.push_str("columns");
    for c in &s.columns {
        let _ = write!(out, "\t{}:{}", c.name, c.reveal);
    }
    out.push('\n');
    for i in 0..s.n_paths {
        let row: Vec<String> = s
            .columns
            .iter()
            .map(|c| format!("{:?}", c.values[i]))
            .collect();
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

pub fn read_paths(text: &str) -> Result<PathSample> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty input".into(),
    })?;
    let h: Vec<&str> = head.split('\t').collect();
    if h.len() != 4 || h[0] != "sample" {
        return Err(Error::Parse {
            line: 1,
            msg: "expected sample header".into(),
        });
    }
    let n = parse_usize(h[1], 1)?;
    let horizon = parse_usize(h[2], 1)?;
    let seed = h[3].parse::<u64>().map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    let (_, cols) = lines.next().ok_or(Error::Parse {
        line: 2,
        msg: "missing columns line".into(),
    })?;
    let c: Vec<&str> = cols.split('\t').collect();
    if c.first() != Some(&"columns") {
        return Err(Error::Parse {
            line: 2,
            msg: "expected columns line".into(),
        });
    }
    let mut columns = Vec::new();
    for spec in &c[1..] {
        let (name, reveal) = spec.rsplit_once(':').ok_or(Error::Parse {
            line: 2,
            msg: format!("bad column {spec:?}"),
        })?;
        columns.push(Column {
            name: name.to_string(),
            reveal: parse_usize(reveal, 2)?,
            values: Vec::with_capacity(n),
        });
    }
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != columns.len() {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected {} fields", columns.len()),
            });
        }
        for (col, v) in columns.iter_mut().zip(f) {
            col.values.push(parse_f64(v, i + 1)?);
        }
    }
    if columns.iter().any(|c| c.values.len() != n) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected {n} paths"),
        });
    }
    Ok(PathSample {
        n_paths: n,
        horizon,
        seed,
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::paths::{simulate_paths, InnovationSpec};

    #[test]
    fn lattice_round_trip() {
        let l = ScenarioLattice::build(
            2,
            |_| vec![0.25, 0.75],
            |n| vec![("X".into(), n.id as f64 * 0.1), ("Y".into(), -1.0 / 3.0)],
        )
        .unwrap();
        let text = write_lattice(&l);
        assert_eq!(read_lattice(&text).unwrap(), l);
    }

    #[test]
    fn paths_round_trip() {
        let s = simulate_paths(
            &InnovationSpec::new(2).column("e1", 1).column("e2", 2),
            17,
            5,
        )
        .unwrap();
        assert_eq!(read_paths(&write_paths(&s)).unwrap(), s);
    }

    #[test]
    fn malformed_lattice_rejected() {
        assert!(read_lattice("horizon\t1\n0\t0\t-\t1\n1\t1\t0\t0.4\n").is_err());
        assert!(read_lattice("horizon\tx\n").is_err());
    }
}
