//! Line-oriented text format for networks and trip tables.
//!
//! Network files hold typed sections (`[intersection]`, `[edge]`, `[lane]`,
//! `[connection]`, `[phase]`) with one `key=value` record per line. Trip
//! files hold one `trip <id> <depart> route=<lane>,<lane>,...` per line.
//! `#` starts a comment in both.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::demand::{Trip, TripTable};
use super::network::*;
use super::ScenarioError;

pub fn network_to_string(net: &RoadNetwork) -> String {
    let mut s = String::from("# igrl road network v1\n[intersection]\n");
    for i in &net.intersections {
        let _ = write!(s, "id={} x={} y={}", i.id, i.x, i.y);
        if let Some(t) = i.tsc {
            let _ = write!(s, " tsc={t}");
        }
        s.push('\n');
    }
    s.push_str("[edge]\n");
    for e in &net.edges {
        let _ = writeln!(s, "id={} from={} to={} length={} lanes={}", e.id, e.from, e.to, e.length, e.lane_count);
    }
    s.push_str("[lane]\n");
    for l in &net.lanes {
        let _ = writeln!(s, "id={} edge={} index={} length={} speed={}", l.id, l.edge, l.index, l.length, l.speed_limit);
    }
    s.push_str("[connection]\n");
    for c in &net.connections {
        let _ = write!(s, "id={} node={} from={} to={}", c.id, c.intersection, c.from_lane, c.to_lane);
        if let Some(t) = c.tsc {
            let _ = write!(s, " tsc={t}");
        }
        s.push('\n');
    }
    s.push_str("[phase]\n");
    for p in &net.programs {
        for (k, ph) in p.phases.iter().enumerate() {
            let open: Vec<String> =
                ph.open.iter().map(|o| format!("{}:{}", o.connection, u8::from(o.priority))).collect();
            let _ = writeln!(
                s,
                "tsc={} index={} kind={} duration={} open={}",
                p.tsc,
                k,
                ph.kind.as_str(),
                ph.duration,
                open.join(",")
            );
        }
    }
    s
}

struct Record<'a> {
    line: usize,
    fields: HashMap<&'a str, &'a str>,
}

impl<'a> Record<'a> {
    fn parse(line: usize, text: &'a str) -> Result<Self, ScenarioError> {
        let mut fields = HashMap::new();
        for tok in text.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| parse_err(line, format!("expected key=value, found `{tok}`")))?;
            if fields.insert(k, v).is_some() {
                return Err(parse_err(line, format!("duplicate key `{k}`")));
            }
        }
        Ok(Self { line, fields })
    }

    fn raw(&self, key: &str) -> Result<&'a str, ScenarioError> {
        self.fields.get(key).copied().ok_or_else(|| parse_err(self.line, format!("missing key `{key}`")))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, ScenarioError> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| parse_err(self.line, format!("invalid value `{v}` for `{key}`")))
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, ScenarioError> {
        if self.fields.contains_key(key) {
            self.get(key).map(Some)
        } else {
            Ok(None)
        }
    }
}

fn parse_err(line: usize, message: String) -> ScenarioError {
    ScenarioError::Parse { line, message }
}

fn strip_comment(l: &str) -> &str {
    l.split('#').next().unwrap_or("").trim()
}

/// Parses a network and checks its structural invariants.
pub fn network_from_str(text: &str) -> Result<RoadNetwork, ScenarioError> {
    let mut net = RoadNetwork::default();
    let mut section: Option<String> = None;
    let mut phases: Vec<(usize, usize, usize, Phase)> = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = no + 1;
        let l = strip_comment(raw);
        if l.is_empty() {
            continue;
        }
        if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            match name {
                "intersection" | "edge" | "lane" | "connection" | "phase" => section = Some(name.to_string()),
                other => return Err(parse_err(line, format!("unknown section `[{other}]`"))),
            }
            continue;
        }
        let rec = Record::parse(line, l)?;
        match section.as_deref() {
            Some("intersection") => net.intersections.push(Intersection {
                id: IntersectionId(rec.get("id")?),
                x: rec.get("x")?,
                y: rec.get("y")?,
                tsc: rec.opt::<usize>("tsc")?.map(TscId),
            }),
            Some("edge") => net.edges.push(Edge {
                id: EdgeId(rec.get("id")?),
                from: IntersectionId(rec.get("from")?),
                to: IntersectionId(rec.get("to")?),
                length: rec.get("length")?,
                lane_count: rec.get("lanes")?,
            }),
            Some("lane") => net.lanes.push(Lane {
                id: LaneId(rec.get("id")?),
                edge: EdgeId(rec.get("edge")?),
                index: rec.get("index")?,
                length: rec.get("length")?,
                speed_limit: rec.get("speed")?,
            }),
            Some("connection") => net.connections.push(Connection {
                id: ConnectionId(rec.get("id")?),
                intersection: IntersectionId(rec.get("node")?),
                from_lane: LaneId(rec.get("from")?),
                to_lane: LaneId(rec.get("to")?),
                tsc: rec.opt::<usize>("tsc")?.map(TscId),
            }),
            Some("phase") => {
                let kind = match rec.raw("kind")? {
                    "green" => PhaseKind::Green,
                    "yellow" => PhaseKind::Yellow,
                    other => return Err(parse_err(line, format!("unknown phase kind `{other}`"))),
                };
                let mut open = Vec::new();
                let list = rec.raw("open")?;
                for item in list.split(',').filter(|s| !s.is_empty()) {
                    let (c, p) = item
                        .split_once(':')
                        .ok_or_else(|| parse_err(line, format!("expected conn:priority, found `{item}`")))?;
                    let connection = ConnectionId(
                        c.parse().map_err(|_| parse_err(line, format!("invalid connection id `{c}`")))?,
                    );
                    let priority = match p {
                        "1" => true,
                        "0" => false,
                        _ => return Err(parse_err(line, format!("invalid priority flag `{p}`"))),
                    };
                    open.push(OpenConnection { connection, priority });
                }
                let phase = Phase { kind, duration: rec.get("duration")?, open };
                phases.push((line, rec.get("tsc")?, rec.get("index")?, phase));
            }
            _ => return Err(parse_err(line, "record outside of any section".into())),
        }
    }
    let n_tsc = net.intersections.iter().filter_map(|i| i.tsc).map(|t| t.index() + 1).max().unwrap_or(0);
    net.programs = (0..n_tsc).map(|t| PhaseProgram { tsc: TscId(t), phases: vec![] }).collect();
    for (line, tsc, index, phase) in phases {
        let prog = net
            .programs
            .get_mut(tsc)
            .ok_or_else(|| parse_err(line, format!("phase for unknown controller {tsc}")))?;
        if index != prog.phases.len() {
            return Err(parse_err(line, format!("phase index {index} out of order for controller {tsc}")));
        }
        prog.phases.push(phase);
    }
    net.validate(ValidationProfile::Structural)?;
    Ok(net)
}

pub fn save_network(net: &RoadNetwork, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    std::fs::write(path, network_to_string(net))?;
    Ok(())
}

pub fn load_network(path: impl AsRef<Path>) -> Result<RoadNetwork, ScenarioError> {
    network_from_str(&std::fs::read_to_string(path)?)
}

pub fn trips_to_string(trips: &TripTable) -> String {
    let mut s = String::from("# igrl trips v1\n");
    for t in &trips.trips {
        let route: Vec<String> = t.route.iter().map(|l| l.to_string()).collect();
        let _ = writeln!(s, "trip {} {} route={}", t.id, t.depart, route.join(","));
    }
    s
}

/// Parses a trip table; when `net` is given the routes are validated
/// against it.
pub fn trips_from_str(text: &str, net: Option<&RoadNetwork>) -> Result<TripTable, ScenarioError> {
    let mut trips = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = no + 1;
        let l = strip_comment(raw);
        if l.is_empty() {
            continue;
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 4 || toks[0] != "trip" {
            return Err(parse_err(line, "expected `trip <id> <depart> route=...`".into()));
        }
        let id = toks[1].parse().map_err(|_| parse_err(line, format!("invalid trip id `{}`", toks[1])))?;
        let depart = toks[2].parse().map_err(|_| parse_err(line, format!("invalid departure `{}`", toks[2])))?;
        let list = toks[3]
            .strip_prefix("route=")
            .ok_or_else(|| parse_err(line, "expected `route=` field".into()))?;
        let route = list
            .split(',')
            .map(|x| x.parse::<usize>().map(LaneId))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| parse_err(line, format!("invalid route `{list}`")))?;
        trips.push(Trip { id, depart, route });
    }
    let table = TripTable { trips };
    if let Some(n) = net {
        table.validate(n)?;
    }
    Ok(table)
}

pub fn save_trips(trips: &TripTable, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    std::fs::write(path, trips_to_string(trips))?;
    Ok(())
}

pub fn load_trips(path: impl AsRef<Path>, net: Option<&RoadNetwork>) -> Result<TripTable, ScenarioError> {
    trips_from_str(&std::fs::read_to_string(path)?, net)
}
