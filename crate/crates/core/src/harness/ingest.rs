//! Two-file CSV ingestion.
//!
//! Longitudinal file: `id,biomarker,time,count,<covariates..>`, one row per
//! count. Survival file: `id,time,event,<covariates..>`, one row per subject.
//! Design columns other than `intercept` and `time` are looked up in the
//! longitudinal row first, then in the subject's survival row.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::{JointModelSpec, LongitudinalRecord, SubjectData, INTERCEPT, TIME};

/// A cleaned survival file.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalTable {
    pub ids: Vec<String>,
    pub times: Vec<f64>,
    pub events: Vec<bool>,
    /// Group label per subject when a group column is configured.
    pub groups: Option<Vec<String>>,
    columns: Vec<String>,
    /// Raw covariate cells per subject, in `columns` order.
    cells: Vec<Vec<String>>,
    lines: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: JointModelSpec,
    pub subjects: Vec<SubjectData>,
    pub groups: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub n_subjects: usize,
    pub n_records: usize,
    pub n_events: usize,
    pub censoring_rate: f64,
    /// Share of subjects by number of longitudinal records.
    pub records_per_subject: BTreeMap<usize, f64>,
}

impl Dataset {
    pub fn summary(&self) -> IngestSummary {
        let n = self.subjects.len();
        let n_events = self.subjects.iter().filter(|s| s.event).count();
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for s in &self.subjects {
            *counts.entry(s.records.len()).or_default() += 1;
        }
        IngestSummary {
            n_subjects: n,
            n_records: self.subjects.iter().map(|s| s.records.len()).sum(),
            n_events,
            censoring_rate: 1.0 - n_events as f64 / n as f64,
            records_per_subject: counts.into_iter().map(|(k, c)| (k, c as f64 / n as f64)).collect(),
        }
    }
}

fn input_error(file: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Input {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

fn reader(input: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input)
}

fn header(file: &str, rdr: &mut csv::Reader<impl Read>, leading: &[&str]) -> Result<Vec<String>> {
    let h: Vec<String> = rdr
        .headers()
        .map_err(|e| input_error(file, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if h.len() < leading.len() || h.iter().zip(leading).any(|(a, b)| a != b) {
        return Err(input_error(
            file,
            1,
            format!("header must start with {}, got {}", leading.join(","), h.join(",")),
        ));
    }
    for (k, c) in h.iter().enumerate() {
        if h[..k].contains(c) {
            return Err(input_error(file, 1, format!("duplicate column '{c}'")));
        }
    }
    Ok(h)
}

fn parse_time(file: &str, line: usize, s: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(t) if t.is_finite() && t >= 0.0 => Ok(t),
        _ => Err(input_error(file, line, format!("time '{s}' is not a finite number >= 0"))),
    }
}

/// Numeric value of a covariate cell, through the column's encoding if any.
fn covariate_value(cfg: &RunConfig, file: &str, line: usize, column: &str, raw: &str) -> Result<f64> {
    if let Some(codes) = cfg.data.encode.get(column) {
        return codes
            .get(raw)
            .copied()
            .ok_or_else(|| input_error(file, line, format!("column '{column}': no code for level '{raw}'")));
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(input_error(file, line, format!("column '{column}': '{raw}' is not numeric"))),
    }
}

pub fn read_survival(input: impl Read, file: &str, cfg: &RunConfig) -> Result<SurvivalTable> {
    let mut rdr = reader(input);
    let h = header(file, &mut rdr, &["id", "time", "event"])?;
    if let Some(g) = &cfg.data.group {
        if !h.contains(g) {
            return Err(input_error(file, 1, format!("group column '{g}' is missing")));
        }
    }
    let columns = h[3..].to_vec();
    let mut t = SurvivalTable {
        ids: Vec::new(),
        times: Vec::new(),
        events: Vec::new(),
        groups: cfg.data.group.as_ref().map(|_| Vec::new()),
        columns,
        cells: Vec::new(),
        lines: Vec::new(),
    };
    let mut seen: HashMap<String, usize> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            input_error(file, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(input_error(file, line, "empty subject id"));
        }
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(input_error(file, line, format!("subject '{id}' already appears on line {first}")));
        }
        let event = match &rec[2] {
            "0" => false,
            "1" => true,
            other => return Err(input_error(file, line, format!("event must be 0 or 1, got '{other}'"))),
        };
        t.times.push(parse_time(file, line, &rec[1])?);
        t.events.push(event);
        if let (Some(g), Some(labels)) = (&cfg.data.group, t.groups.as_mut()) {
            let k = h.iter().position(|c| c == g).expect("checked above");
            labels.push(rec[k].to_string());
        }
        t.ids.push(id);
        t.cells.push(rec.iter().skip(3).map(str::to_string).collect());
        t.lines.push(line);
    }
    if t.ids.is_empty() {
        return Err(input_error(file, 1, "no subjects"));
    }
    Ok(t)
}

impl SurvivalTable {
    fn cell(&self, i: usize, column: &str) -> Option<&str> {
        self.columns.iter().position(|c| c == column).map(|k| self.cells[i][k].as_str())
    }
}

/// Builds the dataset from open readers; `names` label the two inputs in
/// error messages.
pub fn ingest_readers(
    longitudinal: impl Read,
    survival: impl Read,
    names: (&str, &str),
    cfg: &RunConfig,
) -> Result<Dataset> {
    let spec = cfg.model_spec()?;
    let (lf, sf) = names;
    let surv = read_survival(survival, sf, cfg)?;
    let index: HashMap<&str, usize> = surv.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let mut subjects: Vec<SubjectData> = Vec::with_capacity(surv.ids.len());
    for (i, id) in surv.ids.iter().enumerate() {
        let survival_covariates = spec
            .survival_covariates()
            .iter()
            .map(|c| {
                let raw = surv
                    .cell(i, c)
                    .ok_or_else(|| input_error(sf, 1, format!("survival covariate column '{c}' is missing")))?;
                covariate_value(cfg, sf, surv.lines[i], c, raw)
            })
            .collect::<Result<Vec<_>>>()?;
        subjects.push(SubjectData {
            id: id.clone(),
            records: Vec::new(),
            observed_time: surv.times[i],
            event: surv.events[i],
            survival_covariates,
        });
    }

    let mut rdr = reader(longitudinal);
    let h = header(lf, &mut rdr, &["id", "biomarker", "time", "count"])?;
    let lcol = |c: &str| h.iter().skip(4).position(|x| x == c).map(|k| k + 4);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            input_error(lf, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let id = &rec[0];
        let &i = index
            .get(id)
            .ok_or_else(|| input_error(lf, line, format!("subject '{id}' has no row in the survival file")))?;
        let k = spec
            .biomarkers()
            .iter()
            .position(|b| b.name == rec[1])
            .ok_or_else(|| input_error(lf, line, format!("unknown biomarker '{}'", &rec[1])))?;
        let time = parse_time(lf, line, &rec[2])?;
        let count = parse_count(lf, line, &rec[3])?;
        let design = |col: &str| -> Result<f64> {
            match col {
                INTERCEPT => Ok(1.0),
                TIME => Ok(time),
                c => {
                    if let Some(j) = lcol(c) {
                        covariate_value(cfg, lf, line, c, &rec[j])
                    } else if let Some(raw) = surv.cell(i, c) {
                        covariate_value(cfg, sf, surv.lines[i], c, raw)
                    } else {
                        Err(input_error(lf, 1, format!("design column '{c}' is in neither file")))
                    }
                }
            }
        };
        let bm = &spec.biomarkers()[k];
        let fixed_covariates = bm.fixed.iter().map(|c| design(c)).collect::<Result<Vec<_>>>()?;
        let random_design = bm.random.iter().map(|c| design(c)).collect::<Result<Vec<_>>>()?;
        subjects[i].records.push(LongitudinalRecord {
            time,
            count,
            biomarker: k,
            fixed_covariates,
            random_design,
        });
    }
    for s in &subjects {
        s.validate(&spec)?;
    }
    Ok(Dataset {
        spec,
        subjects,
        groups: surv.groups,
    })
}

fn parse_count(file: &str, line: usize, s: &str) -> Result<u64> {
    if let Ok(c) = s.parse::<u64>() {
        return Ok(c);
    }
    Err(input_error(file, line, format!("count '{s}' is not a nonnegative integer")))
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Input {
        file: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })
}

/// Reads the files named in `cfg.data`.
pub fn ingest(cfg: &RunConfig) -> Result<Dataset> {
    let (lp, sp) = (cfg.longitudinal_path()?, cfg.survival_path()?);
    ingest_readers(
        open(lp)?,
        open(sp)?,
        (&lp.display().to_string(), &sp.display().to_string()),
        cfg,
    )
}

/// Survival file only, for Kaplan-Meier curves.
pub fn ingest_survival(cfg: &RunConfig) -> Result<SurvivalTable> {
    let sp = cfg.survival_path()?;
    read_survival(open(sp)?, &sp.display().to_string(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> RunConfig {
        RunConfig::from_toml(
            r#"
[data]
group = "drug"
encode = { drug = { CBZ = 0, LTG = 1 } }
[[biomarker]]
name = "qol"
fixed = ["intercept", "time", "drug", "age"]
random = ["intercept"]
[survival]
covariates = ["drug"]
"#,
        )
        .unwrap()
    }

    const SURV: &str = "id,time,event,drug\na,2.5,1,LTG\nb,3,0,CBZ\n";

    fn run(long: &str, surv: &str) -> Result<Dataset> {
        ingest_readers(long.as_bytes(), surv.as_bytes(), ("long.csv", "surv.csv"), &cfg())
    }

    #[test]
    fn minimal_pair() {
        let d = run("id,biomarker,time,count,age\na,qol,0,4,51\na,qol,0.5,2,51\nb,qol,0,7,40\n", SURV).unwrap();
        assert_eq!(d.subjects.len(), 2);
        let a = &d.subjects[0];
        assert_eq!(a.records[1].fixed_covariates, vec![1.0, 0.5, 1.0, 51.0]);
        assert_eq!(a.records[1].count, 2);
        assert_eq!(a.survival_covariates, vec![1.0]);
        assert!(a.event && !d.subjects[1].event);
        assert_eq!(d.groups.as_deref(), Some(&["LTG".to_string(), "CBZ".to_string()][..]));
        let s = d.summary();
        assert_eq!(s.censoring_rate, 0.5);
        assert_eq!(s.records_per_subject[&1], 0.5);
    }

    #[test]
    fn one_subject() {
        let c = RunConfig::from_toml("[[biomarker]]\nname = \"y\"\nfixed = [\"intercept\"]\nrandom = [\"intercept\"]")
            .unwrap();
        let d = ingest_readers(
            "id,biomarker,time,count\n1,y,0,3\n".as_bytes(),
            "id,time,event\n1,1.5,0\n".as_bytes(),
            ("l", "s"),
            &c,
        )
        .unwrap();
        assert_eq!(d.subjects.len(), 1);
        assert_eq!(d.subjects[0].records[0].count, 3);
    }

    fn message(e: Error) -> (String, usize) {
        match e {
            Error::Input { file, line, message } => (format!("{file}: {message}"), line),
            other => panic!("expected an input error, got {other}"),
        }
    }

    #[test]
    fn orphan_names_the_subject() {
        let (m, line) = message(run("id,biomarker,time,count,age\na,qol,0,4,51\nzz9,qol,0,1,3\n", SURV).unwrap_err());
        assert!(m.contains("zz9") && m.starts_with("long.csv"), "{m}");
        assert_eq!(line, 3);
    }

    #[test]
    fn bad_cells_report_lines() {
        let (m, line) = message(run("id,biomarker,time,count,age\na,qol,0,4.5,51\n", SURV).unwrap_err());
        assert!(m.contains("4.5"), "{m}");
        assert_eq!(line, 2);
        let (m, _) = message(run("id,biomarker,time,count,age\na,qol,0,-1,51\n", SURV).unwrap_err());
        assert!(m.contains("-1"));
        let (m, line) = message(run("id,biomarker,time,count,age\n", "id,time,event,drug\na,1,2,LTG\n").unwrap_err());
        assert!(m.contains("event") && line == 2, "{m}");
        let (m, _) = message(run("id,biomarker,time,count,age\n", "id,time,event,drug\na,1,1,XYZ\n").unwrap_err());
        assert!(m.contains("XYZ"));
        let (m, line) = message(run("id,biomarker,time,count,age\n", "id,time,event,drug\na,1,1,LTG\na,2,0,CBZ\n").unwrap_err());
        assert!(m.contains("line 2") && line == 3, "{m}");
        let (m, _) = message(run("id,biomarker,time,count,age\na,bp,0,1,3\n", SURV).unwrap_err());
        assert!(m.contains("bp"));
        let (m, _) = message(run("id,biomarker,time,count,age\na,qol,-2,1,3\n", SURV).unwrap_err());
        assert!(m.contains("time"));
    }

    #[test]
    fn schema_mismatch() {
        let (m, line) = message(run("id,time,count\n", SURV).unwrap_err());
        assert!(m.contains("header") && line == 1, "{m}");
        let (m, _) = message(run("id,biomarker,time,count\na,qol,0,1\n", SURV).unwrap_err());
        assert!(m.contains("age"), "{m}");
        let e = run("id,biomarker,time,count,age\n", "id,time,event\na,1,1\n").unwrap_err();
        assert!(e.is_input_error());
    }
}
