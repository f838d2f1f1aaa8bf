//! RFC-4180 CSV writers for every data product.
//!
//! All writers take `io::Write` sinks, emit a header row, and format floats
//! with Rust's shortest round-trip representation, so a fixed computation
//! always produces byte-identical files.

use std::io::Write;

use crate::abm::SimOutput;
use crate::bifurcation::{BifurcationBranch, RegimeReport};
use crate::equilibria::{BasinGrid, Equilibrium};
use crate::error::Result;
use crate::integrate::Trajectory;

fn writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(sink)
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

/// `t,k_a,k_s,k_i`, one row per accepted step.
pub fn write_trajectory<W: Write>(sink: W, traj: &Trajectory) -> Result<()> {
    let mut w = writer(sink);
    w.write_record(["t", "k_a", "k_s", "k_i"]).map_err(io_err)?;
    for (t, s) in traj.times.iter().zip(traj.states.iter()) {
        w.write_record([f(*t), f(s.k_a), f(s.k_s), f(s.k_i)]).map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `k_a,k_s,k_i,class,label,eig1_re,eig1_im,...,eig3_im`, sorted by assets.
pub fn write_equilibria<W: Write>(sink: W, eqs: &[Equilibrium]) -> Result<()> {
    let mut w = writer(sink);
    w.write_record([
        "k_a", "k_s", "k_i", "class", "label", "eig1_re", "eig1_im", "eig2_re", "eig2_im",
        "eig3_re", "eig3_im",
    ])
    .map_err(io_err)?;
    for eq in eqs {
        let e = eq.eigenvalues;
        w.write_record([
            f(eq.state.k_a),
            f(eq.state.k_s),
            f(eq.state.k_i),
            eq.class.name().to_string(),
            eq.label.name().to_string(),
            f(e[0].re),
            f(e[0].im),
            f(e[1].re),
            f(e[1].im),
            f(e[2].re),
            f(e[2].im),
        ])
        .map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `k_a,k_s,k_i,attractor_index,attractor_label`; unresolved nodes keep the
/// last two fields empty.
pub fn write_basins<W: Write>(sink: W, grid: &BasinGrid) -> Result<()> {
    let mut w = writer(sink);
    w.write_record(["k_a", "k_s", "k_i", "attractor_index", "attractor_label"]).map_err(io_err)?;
    for idx in 0..grid.spec.n_nodes() {
        let node = grid.spec.node(idx);
        let (index, label) = match grid.labels[idx] {
            Some(i) => (i.to_string(), grid.equilibria[i].label.name().to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([f(node.k_a), f(node.k_s), f(node.k_i), index, label]).map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `param,value,k_a,k_s,k_i,class,label`, one row per (value, equilibrium).
pub fn write_branch<W: Write>(sink: W, branch: &BifurcationBranch) -> Result<()> {
    let mut w = writer(sink);
    w.write_record(["param", "value", "k_a", "k_s", "k_i", "class", "label"]).map_err(io_err)?;
    for (value, eqs) in branch.values.iter().zip(branch.equilibria.iter()) {
        for eq in eqs {
            w.write_record([
                branch.param_name.clone(),
                f(*value),
                f(eq.state.k_a),
                f(eq.state.k_s),
                f(eq.state.k_i),
                eq.class.name().to_string(),
                eq.label.name().to_string(),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Two tables: `lo,hi,regime` spans and `kind,value,bracket_lo,bracket_hi`
/// tipping points.
pub fn write_regimes<W: Write>(sink: W, report: &RegimeReport) -> Result<()> {
    let mut w = writer(sink);
    w.write_record(["lo", "hi", "regime"]).map_err(io_err)?;
    for span in &report.regimes {
        w.write_record([f(span.lo), f(span.hi), span.regime.name().to_string()])
            .map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `kind,value,bracket_lo,bracket_hi`, one row per tipping point.
pub fn write_tipping<W: Write>(sink: W, report: &RegimeReport) -> Result<()> {
    let mut w = writer(sink);
    w.write_record(["kind", "value", "bracket_lo", "bracket_hi"]).map_err(io_err)?;
    for tp in &report.tipping_points {
        w.write_record([
            tp.kind.name().to_string(),
            f(tp.value),
            f(tp.bracket.0),
            f(tp.bracket.1),
        ])
        .map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

/// The per-step per-agent ABM table; inapplicable columns stay empty.
pub fn write_abm<W: Write>(sink: W, out: &SimOutput) -> Result<()> {
    let mut w = writer(sink);
    w.write_record([
        "step",
        "agent_type",
        "agent_id",
        "assets_or_capital",
        "soil_mean",
        "income",
        "desire",
        "capital_efficiency",
        "knowledge_efficiency",
        "innovation_demand",
        "innovation_efficiency",
    ])
    .map_err(io_err)?;
    for row in &out.rows {
        w.write_record([
            row.step.to_string(),
            row.agent_type.to_string(),
            row.agent_id.to_string(),
            f(row.assets_or_capital),
            opt(row.soil_mean),
            opt(row.income),
            opt(row.desire),
            opt(row.capital_efficiency),
            opt(row.knowledge_efficiency),
            opt(row.innovation_demand),
            opt(row.innovation_efficiency),
        ])
        .map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `tercile,attribute,min,q1,median,q3,max,mean,n` over a tercile report.
pub fn write_terciles<W: Write>(sink: W, report: &crate::analysis::TercileReport) -> Result<()> {
    let mut w = writer(sink);
    w.write_record(["tercile", "attribute", "min", "q1", "median", "q3", "max", "mean", "n"])
        .map_err(io_err)?;
    for (ti, name) in ["low", "mid", "high"].iter().enumerate() {
        let t = &report.terciles[ti];
        for (attr, b) in [
            ("innovation_efficiency", t.efficiency),
            ("innovation_capital", t.innovation_capital),
            ("capital_efficiency", t.capital_efficiency),
            ("knowledge_efficiency", t.knowledge_efficiency),
            ("innovation_demand", t.innovation_demand),
        ] {
            w.write_record([
                name.to_string(),
                attr.to_string(),
                f(b.min),
                f(b.q1),
                f(b.median),
                f(b.q3),
                f(b.max),
                f(b.mean),
                b.n.to_string(),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn io_err(e: csv::Error) -> crate::error::TrapError {
    crate::error::TrapError::Analysis(format!("csv write: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abm::{run, WorldConfig};
    use crate::integrate::integrate;
    use crate::integrate::IntegrationSettings;
    use crate::model::{ParameterSet, StateVector};

    #[test]
    fn trajectory_header_and_shape() {
        let traj = integrate(
            StateVector::new(0.5, 0.8, 0.5),
            &ParameterSet::baseline(),
            0.0,
            1.0,
            &IntegrationSettings::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,k_a,k_s,k_i"));
        assert_eq!(text.lines().count(), traj.len() + 1);
        assert!(text.ends_with("\r\n"), "RFC-4180 line endings");
    }

    #[test]
    fn abm_table_has_exact_schema_and_empty_inapplicables() {
        let cfg = WorldConfig { n_producers: 3, n_innovators: 1, steps: 2, ..Default::default() };
        let out = run(&cfg).unwrap();
        let mut buf = Vec::new();
        write_abm(&mut buf, &out).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some(
                "step,agent_type,agent_id,assets_or_capital,soil_mean,income,desire,\
                 capital_efficiency,knowledge_efficiency,innovation_demand,innovation_efficiency"
            )
        );
        let first_producer = lines.next().unwrap();
        assert!(first_producer.starts_with("1,producer,0,"));
        // Producer rows leave the four innovator columns empty.
        assert!(first_producer.ends_with(",,,"));
        let innovator_row = text.lines().nth(4).unwrap();
        assert!(innovator_row.starts_with("1,innovator,0,"));
        // Innovator rows leave soil, income, and desire empty.
        let fields: Vec<&str> = innovator_row.split(',').collect();
        assert_eq!(&fields[4..7], &["", "", ""]);
        assert_eq!(text.lines().count(), 1 + 2 * 4);
    }

    #[test]
    fn identical_runs_serialize_identically() {
        let cfg = WorldConfig { n_producers: 5, steps: 10, ..Default::default() };
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_abm(&mut a, &run(&cfg).unwrap()).unwrap();
        write_abm(&mut b, &run(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
