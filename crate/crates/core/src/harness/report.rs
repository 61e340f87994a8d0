//! CSV writers. Report tables carry six significant digits; simulated
//! datasets are written at full precision so they re-ingest exactly.

use std::io::Write;

use super::fmt6;
use crate::error::Result;
use crate::inference::{CureSummary, GroupCure, ParameterSummary};
use crate::simulate::SimulatedDataset;

fn writer(out: impl Write) -> csv::Writer<impl Write> {
    csv::Writer::from_writer(out)
}

/// `parameter,mean,sd,q025,q975`
pub fn write_parameters(rows: &[ParameterSummary], out: impl Write) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["parameter", "mean", "sd", "q025", "q975"])?;
    for p in rows {
        w.write_record([p.name.clone(), fmt6(p.mean), fmt6(p.sd), fmt6(p.q025), fmt6(p.q975)])?;
    }
    w.flush()?;
    Ok(())
}

/// `id,group,mean,q025,q975`
pub fn write_cure_fractions(rows: &[CureSummary], out: impl Write) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["id", "group", "mean", "q025", "q975"])?;
    for c in rows {
        w.write_record([
            c.id.clone(),
            c.group.clone().unwrap_or_else(|| "all".into()),
            fmt6(c.mean),
            fmt6(c.q025),
            fmt6(c.q975),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `group,n,mean,q025,q975`
pub fn write_group_cure(rows: &[GroupCure], out: impl Write) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["group", "n", "mean", "q025", "q975"])?;
    for g in rows {
        w.write_record([g.group.clone(), g.n.to_string(), fmt6(g.mean), fmt6(g.q025), fmt6(g.q975)])?;
    }
    w.flush()?;
    Ok(())
}

/// `group,time,mean,q025,q975`
pub fn write_model_curves(rows: &[(String, f64, ParameterSummary)], out: impl Write) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["group", "time", "mean", "q025", "q975"])?;
    for (g, t, s) in rows {
        w.write_record([g.clone(), fmt6(*t), fmt6(s.mean), fmt6(s.q025), fmt6(s.q975)])?;
    }
    w.flush()?;
    Ok(())
}

/// Longitudinal file of a simulated cohort: `id,biomarker,time,count,x1,x2`.
pub fn write_simulated_longitudinal(data: &SimulatedDataset, out: impl Write) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["id", "biomarker", "time", "count", "x1", "x2"])?;
    for s in &data.subjects {
        for r in &s.records {
            w.write_record([
                s.id.clone(),
                "y".into(),
                r.time.to_string(),
                r.count.to_string(),
                r.fixed_covariates[2].to_string(),
                r.fixed_covariates[3].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `id,time,event,x1`
pub fn write_simulated_survival(data: &SimulatedDataset, out: impl Write) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["id", "time", "event", "x1"])?;
    for s in &data.subjects {
        w.write_record([
            s.id.clone(),
            s.observed_time.to_string(),
            u8::from(s.event).to_string(),
            s.survival_covariates[0].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `id,b_0,b_1,susceptible,cure_probability,event_time`; the event time is
/// empty for cured subjects.
pub fn write_latent_truth(data: &SimulatedDataset, out: impl Write) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["id", "b_0", "b_1", "susceptible", "cure_probability", "event_time"])?;
    for (s, l) in data.subjects.iter().zip(&data.latent) {
        w.write_record([
            s.id.clone(),
            l.random_effects[0].to_string(),
            l.random_effects[1].to_string(),
            u8::from(l.susceptible).to_string(),
            l.cure_probability.to_string(),
            l.event_time.map(|t| t.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
