//! On-disk formats: vectors and matrices as CSV, problem directories, and
//! binary (P5) PGM images.
//!
//! A problem directory holds `y.csv` (one value per line), either `X.csv`
//! (one row per line) or the identity marker `X.identity`, `graph.txt` in
//! the [`PenaltyGraph`] text format, and `meta.json`.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write-read cycle is lossless and output is byte-for-byte reproducible.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::datagen::{Scenario, PRNG_ID};
use crate::error::{FlrError, Result};
use crate::graph::PenaltyGraph;
use crate::problem::{Design, Problem};

pub const Y_FILE: &str = "y.csv";
pub const X_FILE: &str = "X.csv";
pub const IDENTITY_MARKER: &str = "X.identity";
pub const GRAPH_FILE: &str = "graph.txt";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub n: usize,
    pub p: usize,
    pub identity_design: bool,
    pub scenario: Option<Scenario>,
    pub seed: Option<u64>,
    pub prng: Option<String>,
}

impl ProblemMeta {
    pub fn for_scenario(problem: &Problem, scenario: &Scenario) -> Self {
        Self {
            n: problem.n(),
            p: problem.p(),
            identity_design: problem.is_identity(),
            scenario: Some(*scenario),
            seed: Some(scenario.seed),
            prng: Some(PRNG_ID.to_string()),
        }
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let t = s.trim();
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| FlrError::Parse(format!("line {line}: not a finite number: {t:?}")))
}

/// One value per line; blank lines are skipped.
pub fn read_vector<R: BufRead>(reader: R) -> Result<Array1<f64>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(parse_f64(&line, i + 1)?);
        }
    }
    Ok(Array1::from(out))
}

pub fn write_vector<W: Write>(mut w: W, v: &Array1<f64>) -> Result<()> {
    let mut s = String::with_capacity(v.len() * 20);
    for x in v {
        s.push_str(&format!("{x}\n"));
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Comma-separated rows without a header; all rows must have equal length.
pub fn read_matrix<R: Read>(reader: R) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| FlrError::Parse(format!("row {}: {e}", i + 1)))?;
        if ncols.is_some_and(|c| c != rec.len()) {
            return Err(FlrError::Parse(format!("row {} has {} columns", i + 1, rec.len())));
        }
        ncols = Some(rec.len());
        for field in rec.iter() {
            data.push(parse_f64(field, i + 1)?);
        }
        nrows += 1;
    }
    let ncols = ncols.unwrap_or(0);
    Array2::from_shape_vec((nrows, ncols), data).map_err(|e| FlrError::Parse(e.to_string()))
}

pub fn write_matrix<W: Write>(w: W, x: &Array2<f64>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in x.rows() {
        wtr.write_record(row.iter().map(|v| format!("{v}")))
            .map_err(|e| FlrError::Parse(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the four problem files into `dir`, creating it if needed.
pub fn write_problem_dir(dir: &Path, problem: &Problem, meta: &ProblemMeta) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_vector(fs::File::create(dir.join(Y_FILE))?, problem.y())?;
    match problem.design() {
        Design::Dense(x) => {
            let _ = fs::remove_file(dir.join(IDENTITY_MARKER));
            write_matrix(fs::File::create(dir.join(X_FILE))?, x)?;
        }
        Design::Identity => {
            let _ = fs::remove_file(dir.join(X_FILE));
            fs::write(dir.join(IDENTITY_MARKER), format!("identity {}\n", problem.p()))?;
        }
    }
    problem.graph().write_text(fs::File::create(dir.join(GRAPH_FILE))?)?;
    let mut json = serde_json::to_string_pretty(meta)?;
    json.push('\n');
    fs::write(dir.join(META_FILE), json)?;
    Ok(())
}

/// Reads a problem directory; penalties are set to zero.
pub fn read_problem_dir(dir: &Path) -> Result<(Problem, Option<ProblemMeta>)> {
    let open = |name: &str| {
        fs::File::open(dir.join(name)).map_err(|e| FlrError::Parse(format!("{}: {e}", dir.join(name).display())))
    };
    let y = read_vector(BufReader::new(open(Y_FILE)?))?;
    let graph = PenaltyGraph::read_text(BufReader::new(open(GRAPH_FILE)?))?;
    let meta = match fs::read_to_string(dir.join(META_FILE)) {
        Ok(s) => Some(serde_json::from_str(&s)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    let problem = if dir.join(X_FILE).exists() {
        let x = read_matrix(BufReader::new(open(X_FILE)?))?;
        Problem::new(y, x, graph, 0.0, 0.0)?
    } else if dir.join(IDENTITY_MARKER).exists() {
        Problem::identity(y, graph, 0.0, 0.0)?
    } else {
        return Err(FlrError::Parse(format!(
            "{}: neither {X_FILE} nor {IDENTITY_MARKER} present",
            dir.display()
        )));
    };
    Ok((problem, meta))
}

/// An 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn from_unit(width: usize, height: usize, values: &Array1<f64>) -> Self {
        let pixels = values
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        Self { width, height, pixels }
    }
}

/// Reads a binary PGM (`P5`, maxval at most 255). Comments are allowed in
/// the header.
pub fn read_pgm<R: Read>(mut reader: R) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let bad = |msg: &str| FlrError::Parse(format!("PGM: {msg}"));
    let mut pos = 0;
    let mut token = |bytes: &[u8]| -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token(&bytes)? != "P5" {
        return Err(bad("not a binary (P5) graymap"));
    }
    let num = |s: String| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let width = num(token(&bytes)?)?;
    let height = num(token(&bytes)?)?;
    let maxval = num(token(&bytes)?)?;
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit images are supported"));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = pos + 1;
    let len = width * height;
    if bytes.len() < start + len {
        return Err(bad("raster shorter than width * height"));
    }
    let pixels = bytes[start..start + len]
        .iter()
        .map(|&b| {
            if maxval == 255 {
                b
            } else {
                ((b as usize * 255 + maxval / 2) / maxval) as u8
            }
        })
        .collect();
    Ok(GrayImage { width, height, pixels })
}

pub fn write_pgm<W: Write>(mut w: W, img: &GrayImage) -> Result<()> {
    write!(w, "P5\n{} {}\n255\n", img.width, img.height)?;
    w.write_all(&img.pixels)?;
    Ok(())
}
