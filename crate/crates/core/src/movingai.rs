//! MovingAI grid maps and scenario files.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{AgentId, Instance, InstanceBuilder, ModelError, VertexId};
use crate::time::Time;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    At { line: usize, column: usize, message: String },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

fn at(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError::At { line, column, message: message.into() }
}

pub type Cell = (u32, u32);

/// A rectangular grid of passable and blocked cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    pub width: u32,
    pub height: u32,
    passable: Vec<bool>,
}

impl GridMap {
    pub fn open(width: u32, height: u32) -> GridMap {
        GridMap { width, height, passable: vec![true; (width * height) as usize] }
    }

    pub fn passable(&self, (x, y): Cell) -> bool {
        x < self.width && y < self.height && self.passable[(y * self.width + x) as usize]
    }

    pub fn set_passable(&mut self, (x, y): Cell, value: bool) {
        self.passable[(y * self.width + x) as usize] = value;
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("type octile\nheight {}\nwidth {}\nmap\n", self.height, self.width);
        for y in 0..self.height {
            for x in 0..self.width {
                s.push(if self.passable((x, y)) { '.' } else { '@' });
            }
            s.push('\n');
        }
        s
    }

    /// 4-connected graph over passable cells with unit edges.
    pub fn graph(&self) -> GridGraph {
        let mut cell_vertex = vec![None; (self.width * self.height) as usize];
        let mut vertex_cell = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.passable((x, y)) {
                    cell_vertex[(y * self.width + x) as usize] = Some(VertexId(vertex_cell.len() as u32));
                    vertex_cell.push((x, y));
                }
            }
        }
        let mut edges = Vec::new();
        for &(x, y) in &vertex_cell {
            let v = cell_vertex[(y * self.width + x) as usize].unwrap();
            for (nx, ny) in [(x + 1, y), (x, y + 1)] {
                if self.passable((nx, ny)) {
                    edges.push((v, cell_vertex[(ny * self.width + nx) as usize].unwrap()));
                }
            }
        }
        GridGraph { width: self.width, height: self.height, cell_vertex, vertex_cell, edges }
    }
}

/// Vertex numbering of a [`GridMap`].
#[derive(Debug, Clone)]
pub struct GridGraph {
    pub width: u32,
    pub height: u32,
    cell_vertex: Vec<Option<VertexId>>,
    vertex_cell: Vec<Cell>,
    edges: Vec<(VertexId, VertexId)>,
}

pub fn cell_label((x, y): Cell) -> String {
    format!("{x},{y}")
}

pub fn parse_cell_label(label: &str) -> Option<Cell> {
    let (x, y) = label.split_once(',')?;
    Some((x.trim().parse().ok()?, y.trim().parse().ok()?))
}

impl GridGraph {
    pub fn num_vertices(&self) -> usize {
        self.vertex_cell.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex(&self, (x, y): Cell) -> Option<VertexId> {
        if x >= self.width || y >= self.height {
            return None;
        }
        self.cell_vertex[(y * self.width + x) as usize]
    }

    pub fn cell(&self, v: VertexId) -> Cell {
        self.vertex_cell[v.index()]
    }

    /// Instance with agent `k` moving from `tasks[k].0` to `tasks[k].1`
    /// at `speeds[k]` cells per time unit.
    pub fn instance(&self, tasks: &[(Cell, Cell)], speeds: &[u32]) -> Result<Instance, ModelError> {
        let durations: Vec<Time> = speeds.iter().map(|&s| Time::new(1, s as i64)).collect();
        self.instance_with_durations(tasks, &durations)
    }

    pub fn instance_with_durations(&self, tasks: &[(Cell, Cell)], durations: &[Time]) -> Result<Instance, ModelError> {
        let mut b = InstanceBuilder::new();
        for &c in &self.vertex_cell {
            b.add_vertex(cell_label(c))?;
        }
        for &(u, v) in &self.edges {
            b.add_edge(u, v)?;
        }
        for (k, (&(s, g), &d)) in tasks.iter().zip(durations).enumerate() {
            let missing = |c: Cell| ModelError::InvalidTask(format!("agent {k}: cell {} is not passable", cell_label(c)));
            let start = self.vertex(s).ok_or_else(|| missing(s))?;
            let goal = self.vertex(g).ok_or_else(|| missing(g))?;
            let a: AgentId = b.add_agent(start, goal)?;
            b.set_uniform_duration(a, d);
        }
        b.build()
    }
}

/// Reads a MovingAI `.map` file.
pub fn parse_map(text: &str) -> Result<GridMap, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let mut width = None;
    let mut height = None;
    let mut saw_type = false;
    let mut last_line = 0;
    loop {
        let Some((n, line)) = lines.next() else {
            return Err(at(last_line + 1, 1, "missing `map` line"));
        };
        last_line = n;
        let mut words = line.split_whitespace();
        match (words.next(), words.next(), words.next()) {
            (Some("type"), Some(_), None) => saw_type = true,
            (Some("height"), Some(h), None) => {
                height = Some(h.parse::<u32>().map_err(|_| at(n, 8, format!("bad height {h:?}")))?)
            }
            (Some("width"), Some(w), None) => {
                width = Some(w.parse::<u32>().map_err(|_| at(n, 7, format!("bad width {w:?}")))?)
            }
            (Some("map"), None, None) => break,
            (None, ..) => continue,
            _ => return Err(at(n, 1, format!("unexpected header line {line:?}"))),
        }
    }
    if !saw_type {
        return Err(at(1, 1, "missing `type` line"));
    }
    let (Some(width), Some(height)) = (width, height) else {
        return Err(at(last_line, 1, "missing width or height"));
    };
    let mut passable = Vec::with_capacity((width * height) as usize);
    let mut rows = 0;
    for (n, line) in lines {
        if rows == height {
            if line.trim().is_empty() {
                continue;
            }
            return Err(at(n, 1, format!("more than {height} rows")));
        }
        let chars: Vec<char> = line.chars().collect();
        if chars.len() != width as usize {
            return Err(at(n, chars.len().min(width as usize) + 1, format!("row has {} cells, expected {width}", chars.len())));
        }
        for (col, c) in chars.iter().enumerate() {
            passable.push(match c {
                '.' | 'G' => true,
                '@' | 'O' | 'T' => false,
                other => return Err(at(n, col + 1, format!("unknown glyph {other:?}"))),
            });
        }
        rows += 1;
    }
    if rows != height {
        return Err(at(last_line + rows as usize + 1, 1, format!("expected {height} rows, found {rows}")));
    }
    Ok(GridMap { width, height, passable })
}

/// One scenario row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenTask {
    pub bucket: u32,
    pub map: String,
    pub start: Cell,
    pub goal: Cell,
    pub optimal: f64,
}

/// Reads a MovingAI `.scen` file and checks every task against `map`.
pub fn parse_scen(text: &str, map: &GridMap) -> Result<Vec<ScenTask>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let row = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || (row == 1 && line.trim_start().starts_with("version")) {
            continue;
        }
        let err = |message: String| ParseError::Row { row, message };
        let fields: Vec<&str> = if line.contains('\t') { line.split('\t').collect() } else { line.split_whitespace().collect() };
        if fields.len() != 9 {
            return Err(err(format!("expected 9 fields, found {}", fields.len())));
        }
        let num = |k: usize, what: &str| fields[k].trim().parse::<u32>().map_err(|_| err(format!("bad {what} {:?}", fields[k])));
        let bucket = num(0, "bucket")?;
        let (w, h) = (num(2, "width")?, num(3, "height")?);
        if (w, h) != (map.width, map.height) {
            return Err(err(format!("scenario is for a {w}x{h} map, map is {}x{}", map.width, map.height)));
        }
        let start = (num(4, "start x")?, num(5, "start y")?);
        let goal = (num(6, "goal x")?, num(7, "goal y")?);
        for (c, what) in [(start, "start"), (goal, "goal")] {
            if c.0 >= w || c.1 >= h {
                return Err(err(format!("{what} {} out of bounds", cell_label(c))));
            }
            if !map.passable(c) {
                return Err(err(format!("{what} {} is blocked", cell_label(c))));
            }
        }
        let optimal = fields[8].trim().parse::<f64>().map_err(|_| err(format!("bad optimal length {:?}", fields[8])))?;
        out.push(ScenTask { bucket, map: fields[1].to_string(), start, goal, optimal });
    }
    Ok(out)
}

pub fn scen_to_text(tasks: &[ScenTask], map: &GridMap) -> String {
    let mut s = String::from("version 1\n");
    for t in tasks {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            t.bucket, t.map, map.width, map.height, t.start.0, t.start.1, t.goal.0, t.goal.1, t.optimal
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(rows: &[&str]) -> String {
        format!("type octile\nheight {}\nwidth {}\nmap\n{}\n", rows.len(), rows[0].len(), rows.join("\n"))
    }

    #[test]
    fn small_maps() {
        let g = parse_map(&map(&["..", ".."])).unwrap().graph();
        assert_eq!((g.num_vertices(), g.num_edges()), (4, 4));
        let g = parse_map(&map(&[".@."])).unwrap().graph();
        assert_eq!((g.num_vertices(), g.num_edges()), (2, 0));
        let full = GridMap::open(32, 32).graph();
        assert_eq!((full.num_vertices(), full.num_edges()), (1024, 1984));
    }

    #[test]
    fn map_errors_carry_positions() {
        assert_eq!(
            parse_map(&map(&["..", ".x"])),
            Err(ParseError::At { line: 6, column: 2, message: "unknown glyph 'x'".into() })
        );
        assert!(matches!(parse_map(&map(&["..", "..."])), Err(ParseError::At { line: 6, .. })));
        assert!(matches!(parse_map("type octile\nheight 2\nmap\n..\n..\n"), Err(ParseError::At { .. })));
        assert!(matches!(parse_map("type octile\nheight 3\nwidth 2\nmap\n..\n..\n"), Err(ParseError::At { .. })));
    }

    #[test]
    fn scen_rows() {
        let m = parse_map(&map(&["...", ".@.", "..."])).unwrap();
        let text = "version 1\n0\tm.map\t3\t3\t0\t0\t2\t2\t4\n0\tm.map\t3\t3\t2\t0\t2\t0\t0\n";
        let tasks = parse_scen(text, &m).unwrap();
        assert_eq!(tasks.len(), 2);
        assert_eq!(tasks[1].start, tasks[1].goal);
        assert_eq!(parse_scen(&scen_to_text(&tasks, &m), &m).unwrap(), tasks);
        let wrong = "0\tm.map\t4\t3\t0\t0\t2\t2\t4\n";
        assert!(matches!(parse_scen(wrong, &m), Err(ParseError::Row { row: 1, .. })));
        let blocked = "0\tm.map\t3\t3\t1\t1\t2\t2\t4\n";
        assert!(parse_scen(blocked, &m).is_err());
        let outside = "0\tm.map\t3\t3\t5\t1\t2\t2\t4\n";
        assert!(parse_scen(outside, &m).is_err());
    }

    #[test]
    fn map_text_round_trip() {
        let m = parse_map(&map(&["..@.", "T...", "..G."])).unwrap();
        let again = parse_map(&m.to_text()).unwrap();
        assert_eq!(m, again);
        let (a, b) = (m.graph(), again.graph());
        assert_eq!((a.num_vertices(), a.num_edges()), (b.num_vertices(), b.num_edges()));
    }
}
