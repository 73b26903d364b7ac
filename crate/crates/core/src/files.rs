//! On-disk formats: instance and solution documents (JSON), benchmark grids
//! and benchmark results (CSV).
//!
//! Floating-point values in JSON documents are written in exponent form with
//! 17 significant digits, so `parse → write` reproduces a canonical file byte
//! for byte. Non-finite values (a stopping statistic can be `+∞`) are written
//! as the strings `"inf"`, `"-inf"` and `"nan"`.
//!
//! Node labels in instance files are 1-based: sensors are `1..=m` and anchors
//! `m+1..=m+n`.

use serde::de::Error as _;
use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::evaluate::{BenchRow, SolutionReport};
use crate::generate::{GenSpec, RangeExpr};
use crate::problem::{AnchorEdge, Network, Points, ProblemInstance, SensorEdge};
use crate::solver::{SolveTrace, TraceRow};

pub const INSTANCE_FORMAT: &str = "snl-instance";
pub const SOLUTION_FORMAT: &str = "snl-solution";
pub const FORMAT_VERSION: u32 = 1;

/// Rows of the trace kept in a solution file.
pub const TRACE_CAP: usize = 100_000;

// Parsed documents are rejected above these sizes before anything is allocated.
const MAX_DIM: usize = 64;
const MAX_NODES: usize = 1 << 22;

pub const TRACE_COLUMNS: [&str; 7] = ["sweep", "segment", "gamma", "penalized_start", "f", "penalized", "stop_stat"];
pub const BENCH_HEADER: [&str; 9] = ["m", "n", "dim", "rho", "sigma", "reps", "mean_cpu_s", "mean_rmsd", "failures"];
pub const GRID_HEADER: [&str; 6] = ["m", "n", "dim", "rho", "sigma", "seed"];

/// A float that serializes with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Num(f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let x = self.0;
        if x.is_finite() {
            let raw = RawValue::from_string(format!("{x:.16e}")).map_err(S::Error::custom)?;
            raw.serialize(s)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(x) => Ok(Num(x)),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(Num(f64::INFINITY)),
                "-inf" => Ok(Num(f64::NEG_INFINITY)),
                "nan" => Ok(Num(f64::NAN)),
                other => Err(D::Error::custom(format!("expected a number, found {other:?}"))),
            },
        }
    }
}

fn finite(x: Num, what: &str) -> Result<f64> {
    if x.0.is_finite() {
        Ok(x.0)
    } else {
        Err(Error::Malformed(format!("{what} must be finite")))
    }
}

fn points_to_doc(p: &Points) -> Vec<Vec<Num>> {
    p.columns().map(|c| c.iter().copied().map(Num).collect()).collect()
}

fn points_from_doc(dim: usize, cols: &[Vec<Num>], what: &str) -> Result<Points> {
    let mut data = Vec::with_capacity(dim * cols.len());
    for (idx, col) in cols.iter().enumerate() {
        if col.len() != dim {
            return Err(Error::Malformed(format!(
                "{what} {} has {} coordinates, expected {dim}",
                idx + 1,
                col.len()
            )));
        }
        for &x in col {
            data.push(finite(x, what)?);
        }
    }
    Points::from_flat(dim, data)
}

fn check_header(format: &str, version: u32, expected: &str) -> Result<()> {
    if format != expected {
        return Err(Error::Malformed(format!("expected format {expected:?}, found {format:?}")));
    }
    if version != FORMAT_VERSION {
        return Err(Error::Malformed(format!("unsupported format version {version}")));
    }
    Ok(())
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerationDoc {
    m: usize,
    n: usize,
    dim: usize,
    rho: Num,
    sigma: Num,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    format: String,
    version: u32,
    dim: usize,
    num_sensors: usize,
    num_anchors: usize,
    anchors: Vec<Vec<Num>>,
    ss_edges: Vec<(usize, usize, Num)>,
    sa_edges: Vec<(usize, usize, Num)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth: Option<Vec<Vec<Num>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generation: Option<GenerationDoc>,
}

/// Serializes an instance in canonical form.
pub fn write_instance(instance: &ProblemInstance) -> Result<String> {
    let net = instance.network();
    let m = net.num_sensors();
    let doc = InstanceDoc {
        format: INSTANCE_FORMAT.into(),
        version: FORMAT_VERSION,
        dim: net.dim(),
        num_sensors: m,
        num_anchors: net.num_anchors(),
        anchors: points_to_doc(net.anchors()),
        ss_edges: net.ss_edges().iter().map(|e| (e.i + 1, e.j + 1, Num(e.dist))).collect(),
        sa_edges: net
            .sa_edges()
            .iter()
            .map(|e| (e.sensor + 1, m + e.anchor + 1, Num(e.dist)))
            .collect(),
        truth: instance.truth().map(points_to_doc),
        generation: instance.generation().map(|g| GenerationDoc {
            m: g.m,
            n: g.n,
            dim: g.dim,
            rho: Num(g.rho),
            sigma: Num(g.sigma),
            seed: g.seed,
        }),
    };
    let mut out = serde_json::to_string_pretty(&doc).map_err(json_error)?;
    out.push('\n');
    Ok(out)
}

/// Parses and validates an instance document.
pub fn parse_instance(text: &str) -> Result<ProblemInstance> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(json_error)?;
    check_header(&doc.format, doc.version, INSTANCE_FORMAT)?;
    let (dim, m, n) = (doc.dim, doc.num_sensors, doc.num_anchors);
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::Malformed(format!("dimension {dim} outside 1..={MAX_DIM}")));
    }
    if m == 0 || m > MAX_NODES || n > MAX_NODES {
        return Err(Error::Malformed(format!("node counts m = {m}, n = {n} out of range")));
    }
    if doc.anchors.len() != n {
        return Err(Error::Malformed(format!(
            "num_anchors is {n} but {} anchors are listed",
            doc.anchors.len()
        )));
    }
    let anchors = points_from_doc(dim, &doc.anchors, "anchor")?;

    let mut ss = Vec::with_capacity(doc.ss_edges.len());
    for &(i, j, d) in &doc.ss_edges {
        if !(1 <= i && i < j && j <= m) {
            return Err(Error::Malformed(format!(
                "sensor edge ({i}, {j}) must satisfy 1 <= i < j <= {m}"
            )));
        }
        ss.push(SensorEdge {
            i: i - 1,
            j: j - 1,
            dist: finite(d, "distance")?,
        });
    }
    let mut sa = Vec::with_capacity(doc.sa_edges.len());
    for &(i, k, d) in &doc.sa_edges {
        if !(1 <= i && i <= m && k > m && k - m <= n) {
            return Err(Error::Malformed(format!(
                "anchor edge ({i}, {k}) must satisfy 1 <= i <= {m} < k <= {}",
                m + n
            )));
        }
        sa.push(AnchorEdge {
            sensor: i - 1,
            anchor: k - m - 1,
            dist: finite(d, "distance")?,
        });
    }
    let network = Network::new(m, anchors, ss, sa)?;

    let truth = match &doc.truth {
        Some(cols) => {
            if cols.len() != m {
                return Err(Error::Malformed(format!("truth lists {} positions for {m} sensors", cols.len())));
            }
            Some(points_from_doc(dim, cols, "true position")?)
        }
        None => None,
    };
    let generation = match doc.generation {
        Some(g) => Some(GenSpec {
            m: g.m,
            n: g.n,
            dim: g.dim,
            rho: finite(g.rho, "generation rho")?,
            sigma: finite(g.sigma, "generation sigma")?,
            seed: g.seed,
        }),
        None => None,
    };
    ProblemInstance::new(network, truth, generation)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rmsd: Option<Num>,
    f_final: Num,
    penalized_final: Num,
    gamma_final: Num,
    sweeps: usize,
    wall_time_s: Num,
    termination: String,
}

type TraceRowDoc = (usize, usize, Num, Num, Num, Num, Num);

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceDoc {
    columns: Vec<String>,
    truncated: bool,
    rows: Vec<TraceRowDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolutionDoc {
    format: String,
    version: u32,
    instance: String,
    dim: usize,
    num_sensors: usize,
    estimates: Vec<Vec<Num>>,
    report: ReportDoc,
    trace: TraceDoc,
}

/// A solver run as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFile {
    /// Path or label of the instance that was solved.
    pub instance: String,
    pub report: SolutionReport,
    pub trace: SolveTrace,
    /// Set when the trace was longer than [`TRACE_CAP`] and only its first
    /// rows were kept.
    pub trace_truncated: bool,
}

impl SolutionFile {
    pub fn new(instance: impl Into<String>, report: SolutionReport, mut trace: SolveTrace) -> Self {
        let trace_truncated = trace.rows.len() > TRACE_CAP;
        trace.rows.truncate(TRACE_CAP);
        Self {
            instance: instance.into(),
            report,
            trace,
            trace_truncated,
        }
    }
}

pub fn write_solution(solution: &SolutionFile) -> Result<String> {
    let r = &solution.report;
    let doc = SolutionDoc {
        format: SOLUTION_FORMAT.into(),
        version: FORMAT_VERSION,
        instance: solution.instance.clone(),
        dim: r.estimates.dim(),
        num_sensors: r.estimates.len(),
        estimates: points_to_doc(&r.estimates),
        report: ReportDoc {
            rmsd: r.rmsd.map(Num),
            f_final: Num(r.f_final),
            penalized_final: Num(r.penalized_final),
            gamma_final: Num(r.gamma_final),
            sweeps: r.sweeps,
            wall_time_s: Num(r.wall_time),
            termination: r.termination.as_str().into(),
        },
        trace: TraceDoc {
            columns: TRACE_COLUMNS.iter().map(|c| c.to_string()).collect(),
            truncated: solution.trace_truncated,
            rows: solution
                .trace
                .rows
                .iter()
                .map(|t| {
                    (
                        t.sweep,
                        t.segment,
                        Num(t.gamma),
                        Num(t.penalized_start),
                        Num(t.f),
                        Num(t.penalized),
                        Num(t.stop_stat),
                    )
                })
                .collect(),
        },
    };
    let mut out = serde_json::to_string_pretty(&doc).map_err(json_error)?;
    out.push('\n');
    Ok(out)
}

pub fn parse_solution(text: &str) -> Result<SolutionFile> {
    let doc: SolutionDoc = serde_json::from_str(text).map_err(json_error)?;
    check_header(&doc.format, doc.version, SOLUTION_FORMAT)?;
    if doc.dim == 0 || doc.dim > MAX_DIM {
        return Err(Error::Malformed(format!("dimension {} outside 1..={MAX_DIM}", doc.dim)));
    }
    if doc.estimates.len() != doc.num_sensors || doc.num_sensors == 0 {
        return Err(Error::Malformed(format!(
            "num_sensors is {} but {} estimates are listed",
            doc.num_sensors,
            doc.estimates.len()
        )));
    }
    if doc.trace.columns != TRACE_COLUMNS {
        return Err(Error::Malformed(format!("unexpected trace columns {:?}", doc.trace.columns)));
    }
    let estimates = points_from_doc(doc.dim, &doc.estimates, "estimate")?;
    let r = doc.report;
    let report = SolutionReport {
        estimates,
        rmsd: r.rmsd.map(|x| x.0),
        f_final: r.f_final.0,
        penalized_final: r.penalized_final.0,
        gamma_final: r.gamma_final.0,
        sweeps: r.sweeps,
        wall_time: r.wall_time_s.0,
        termination: r.termination.parse()?,
    };
    let rows = doc
        .trace
        .rows
        .into_iter()
        .map(|(sweep, segment, gamma, start, f, penalized, stop)| TraceRow {
            sweep,
            gamma: gamma.0,
            penalized_start: start.0,
            f: f.0,
            penalized: penalized.0,
            stop_stat: stop.0,
            segment,
        })
        .collect();
    Ok(SolutionFile {
        instance: doc.instance,
        report,
        trace: SolveTrace { rows },
        trace_truncated: doc.trace.truncated,
    })
}

/// Parses a benchmark grid: CSV with header `m,n,dim,rho,sigma,seed`, `#`
/// comments, and `rho` given as a number, `sqrt(c/m)` or `cbrt(c/m)`.
///
/// An empty file or a header-only file yields an empty grid.
pub fn parse_grid(text: &str) -> Result<Vec<GenSpec>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        None => return Ok(Vec::new()),
        Some(h) => h.map_err(|e| Error::Parse(e.to_string()))?,
    };
    if header.iter().ne(GRID_HEADER) {
        return Err(Error::Parse(format!(
            "grid header must be {}, found {}",
            GRID_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut specs = Vec::new();
    for (line, record) in records.enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |idx: usize| record.get(idx).unwrap_or("");
        let bad = |what: &str| Error::Parse(format!("grid row {}: invalid {what} {:?}", line + 1, field(GRID_HEADER.iter().position(|h| *h == what).unwrap_or(0))));
        if record.len() != GRID_HEADER.len() {
            return Err(Error::Parse(format!(
                "grid row {} has {} fields, expected {}",
                line + 1,
                record.len(),
                GRID_HEADER.len()
            )));
        }
        let m: usize = field(0).parse().map_err(|_| bad("m"))?;
        let n: usize = field(1).parse().map_err(|_| bad("n"))?;
        let dim: usize = field(2).parse().map_err(|_| bad("dim"))?;
        let rho: RangeExpr = field(3).parse().map_err(|_| bad("rho"))?;
        let sigma: f64 = field(4).parse().map_err(|_| bad("sigma"))?;
        let seed: u64 = field(5).parse().map_err(|_| bad("seed"))?;
        let spec = GenSpec {
            m,
            n,
            dim,
            rho: rho.resolve(m.max(1)),
            sigma,
            seed,
        };
        spec.validate()
            .map_err(|e| Error::Parse(format!("grid row {}: {e}", line + 1)))?;
        specs.push(spec);
    }
    Ok(specs)
}

/// Benchmark rows as CSV with header [`BENCH_HEADER`].
pub fn write_bench_csv(rows: &[BenchRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(BENCH_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.spec.m.to_string(),
            r.spec.n.to_string(),
            r.spec.dim.to_string(),
            r.spec.rho.to_string(),
            r.spec.sigma.to_string(),
            r.reps.to_string(),
            format!("{:.6e}", r.mean_cpu_s),
            format!("{:.6e}", r.mean_rmsd),
            r.failures.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, two_sensor_fixture};
    use crate::solver::Termination;

    #[test]
    fn fixture_roundtrip_is_canonical() {
        let inst = two_sensor_fixture();
        let text = write_instance(&inst).unwrap();
        let back = parse_instance(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(write_instance(&back).unwrap(), text);
        assert!(text.contains("\"sa_edges\""));
        // sensor 1 to anchor a4 is labelled (1, 4)
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["sa_edges"][0][0], 1);
        assert_eq!(doc["sa_edges"][0][1], 4);
    }

    #[test]
    fn generated_roundtrip_keeps_metadata() {
        let spec = GenSpec { m: 30, n: 3, dim: 3, rho: 0.5, sigma: 0.1, seed: 99 };
        let inst = generate(&spec).unwrap().into_instance();
        let text = write_instance(&inst).unwrap();
        let back = parse_instance(&text).unwrap();
        assert_eq!(back.generation(), Some(&spec));
        assert_eq!(back, inst);
    }

    #[test]
    fn numbers_have_seventeen_digits() {
        let text = serde_json::to_string(&Num(0.1)).unwrap();
        assert_eq!(text, "1.0000000000000001e-1");
        assert_eq!(serde_json::to_string(&Num(f64::INFINITY)).unwrap(), "\"inf\"");
        let back: Num = serde_json::from_str("\"-inf\"").unwrap();
        assert_eq!(back.0, f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_malformed_instances() {
        let good = write_instance(&two_sensor_fixture()).unwrap();
        for (from, to) in [
            ("\"snl-instance\"", "\"other\""),
            ("\"version\": 1", "\"version\": 2"),
            ("\"num_anchors\": 3", "\"num_anchors\": 2"),
            ("\"dim\": 2", "\"dim\": 3"),
        ] {
            let bad = good.replacen(from, to, 1);
            assert_ne!(bad, good);
            assert!(parse_instance(&bad).is_err(), "accepted {to}");
        }
        assert!(parse_instance("").is_err());
        assert!(parse_instance("{}").is_err());
    }

    #[test]
    fn rejects_bad_edge_labels() {
        let base = |ss: &str, sa: &str| {
            format!(
                r#"{{"format":"snl-instance","version":1,"dim":1,"num_sensors":2,"num_anchors":1,
                "anchors":[[0.0]],"ss_edges":[{ss}],"sa_edges":[{sa}]}}"#
            )
        };
        assert!(parse_instance(&base("[1,2,0.5]", "[1,3,1.0]")).is_ok());
        assert!(parse_instance(&base("[2,1,0.5]", "[1,3,1.0]")).is_err());
        assert!(parse_instance(&base("[1,3,0.5]", "[1,3,1.0]")).is_err());
        assert!(parse_instance(&base("[1,2,0.5]", "[1,2,1.0]")).is_err());
        assert!(parse_instance(&base("[1,2,0.5]", "[1,4,1.0]")).is_err());
        assert!(parse_instance(&base("[1,2,-0.5]", "[1,3,1.0]")).is_err());
        assert!(parse_instance(&base("[1,2,\"inf\"]", "[1,3,1.0]")).is_err());
        assert!(parse_instance(&base("[1,2,0.5],[1,2,0.5]", "[1,3,1.0]")).is_err());
    }

    #[test]
    fn solution_roundtrip() {
        let report = SolutionReport {
            estimates: Points::from_columns(2, &[[0.1, 0.2], [0.3, 0.4]]).unwrap(),
            rmsd: Some(0.01),
            f_final: 1e-9,
            penalized_final: 2e-9,
            gamma_final: 0.5,
            sweeps: 2,
            wall_time: 0.001,
            termination: Termination::Converged,
        };
        let row = |s: usize, stop: f64| TraceRow {
            sweep: s,
            gamma: 0.5,
            penalized_start: 1.0,
            f: 0.5,
            penalized: 0.75,
            stop_stat: stop,
            segment: 0,
        };
        let file = SolutionFile::new("fixture.json", report, SolveTrace { rows: vec![row(1, f64::INFINITY), row(2, 1e-6)] });
        let text = write_solution(&file).unwrap();
        let back = parse_solution(&text).unwrap();
        assert_eq!(back, file);
        assert_eq!(write_solution(&back).unwrap(), text);
    }

    #[test]
    fn trace_is_capped() {
        let row = TraceRow {
            sweep: 1,
            gamma: 1.0,
            penalized_start: 1.0,
            f: 1.0,
            penalized: 1.0,
            stop_stat: 1.0,
            segment: 0,
        };
        let report = SolutionReport {
            estimates: Points::zeros(1, 1),
            rmsd: None,
            f_final: 0.0,
            penalized_final: 0.0,
            gamma_final: 1.0,
            sweeps: TRACE_CAP + 5,
            wall_time: 0.0,
            termination: Termination::SweepCap,
        };
        let file = SolutionFile::new("x", report, SolveTrace { rows: vec![row; TRACE_CAP + 5] });
        assert!(file.trace_truncated);
        assert_eq!(file.trace.len(), TRACE_CAP);
    }

    #[test]
    fn grid_parsing() {
        let text = "# table 1 rows\nm,n,dim,rho,sigma,seed\n1000,100,2,0.1,0.1,7\n3000, 300, 2, sqrt(10/m), 0, 1\n";
        let grid = parse_grid(text).unwrap();
        assert_eq!(grid.len(), 2);
        assert_eq!(grid[0], GenSpec { m: 1000, n: 100, dim: 2, rho: 0.1, sigma: 0.1, seed: 7 });
        assert!((grid[1].rho - (10.0f64 / 3000.0).sqrt()).abs() < 1e-16);
        assert!(parse_grid("").unwrap().is_empty());
        assert!(parse_grid("m,n,dim,rho,sigma,seed\n").unwrap().is_empty());
        assert!(parse_grid("m,n,dim\n1,2,3\n").is_err());
        assert!(parse_grid("m,n,dim,rho,sigma,seed\n10,1,2,abc,0,1\n").is_err());
        assert!(parse_grid("m,n,dim,rho,sigma,seed\n10,1,2,0.1,0\n").is_err());
        assert!(parse_grid("m,n,dim,rho,sigma,seed\n0,1,2,0.1,0,1\n").is_err());
    }

    #[test]
    fn bench_csv_header_only() {
        let csv = write_bench_csv(&[]).unwrap();
        assert_eq!(csv, "m,n,dim,rho,sigma,reps,mean_cpu_s,mean_rmsd,failures\n");
    }
}
