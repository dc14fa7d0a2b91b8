//! Result emission: the results table, per-user sample file, tuning log,
//! and a plain-text summary.
//!
//! The results CSV carries one row per (scenario, configuration) in the
//! table column order popularized by UserKNN bias studies, plus the
//! significance flags, prediction coverage, and cold-start count. Floats
//! are written with six decimals so identical runs produce identical
//! bytes; absent values (e.g. RMSE with zero predictions) are empty
//! fields.
//!
//! The summary table brackets the highest PopCorr/ARP/PL per scenario and
//! stars ARP/PL values significantly lower than that maximum.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{CellSamples, MetricsRow, TuningChoice};
use crate::knn::KnnConfig;
use crate::scalar::Real;

pub const RESULTS_HEADER: &str = "scenario,min_sim,over_common,min_nbrs,k,pop_corr,arp,pl,agg_div,rmse,ndcg_at_10,coverage,cold_start_users,arp_sig_lower,pl_sig_lower";
pub const SAMPLES_HEADER: &str = "scenario,min_sim,over_common,min_nbrs,k,user,arp,pl";
pub const TUNING_HEADER: &str =
    "scenario,config_index,min_sim,over_common,min_nbrs,k,validation_rmse,predictions,chosen";

fn fmt_opt<T: Real>(value: Option<T>) -> String {
    value.map(|v| format!("{v:.6}")).unwrap_or_default()
}

pub fn write_results_csv<T: Real, P: AsRef<Path>>(rows: &[MetricsRow<T>], path: P) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    writeln!(out, "{RESULTS_HEADER}")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{:.6},{},{},{:.6},{},{},{:.6},{},{},{}",
            row.scenario_id,
            row.config.min_sim,
            row.config.over_common,
            row.config.min_nbrs,
            row.config.k,
            row.pop_corr,
            fmt_opt(row.arp),
            fmt_opt(row.pl),
            row.agg_div,
            fmt_opt(row.rmse),
            fmt_opt(row.ndcg_at_10),
            row.coverage,
            row.cold_start_users,
            row.arp_sig_lower,
            row.pl_sig_lower,
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a results CSV back (used by summary re-rendering).
pub fn read_results_csv<P: AsRef<Path>>(path: P) -> Result<Vec<MetricsRow<f64>>> {
    let file = File::open(path.as_ref())?;
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let number = idx + 1;
        if idx == 0 {
            if line != RESULTS_HEADER {
                return Err(Error::MalformedLine {
                    line: number,
                    content: line,
                });
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 15 {
            return Err(Error::MalformedLine {
                line: number,
                content: line,
            });
        }
        let malformed = || Error::MalformedLine {
            line: number,
            content: line.clone(),
        };
        let parse_f = |s: &str| s.parse::<f64>().map_err(|_| malformed());
        let parse_opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                Ok(Some(parse_f(s)?))
            }
        };
        let config = KnnConfig::new(
            parse_f(fields[1])?,
            fields[2].parse().map_err(|_| malformed())?,
            fields[3].parse().map_err(|_| malformed())?,
            fields[4].parse().map_err(|_| malformed())?,
        )?;
        rows.push(MetricsRow {
            scenario_id: fields[0].parse().map_err(|_| malformed())?,
            config,
            pop_corr: parse_f(fields[5])?,
            arp: parse_opt(fields[6])?,
            pl: parse_opt(fields[7])?,
            agg_div: parse_f(fields[8])?,
            rmse: parse_opt(fields[9])?,
            ndcg_at_10: parse_opt(fields[10])?,
            coverage: parse_f(fields[11])?,
            cold_start_users: fields[12].parse().map_err(|_| malformed())?,
            arp_sig_lower: fields[13].parse().map_err(|_| malformed())?,
            pl_sig_lower: fields[14].parse().map_err(|_| malformed())?,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(rows)
}

/// Per-user ARP/PL samples, one row per (cell, user), for external
/// statistical re-analysis.
pub fn write_samples_csv<T: Real, P: AsRef<Path>>(
    samples: &[CellSamples<T>],
    path: P,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    writeln!(out, "{SAMPLES_HEADER}")?;
    for cell in samples {
        let pl_by_user: std::collections::BTreeMap<&str, T> = cell
            .pl
            .iter()
            .map(|(user, v)| (user.as_str(), *v))
            .collect();
        for (user, arp_value) in &cell.arp {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.6},{}",
                cell.scenario_id,
                cell.config.min_sim,
                cell.config.over_common,
                cell.config.min_nbrs,
                cell.config.k,
                user,
                arp_value,
                fmt_opt(pl_by_user.get(user.as_str()).copied()),
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Tuning log: one row per inspected grid value (or the fixed `k`).
pub fn write_tuning_csv<T: Real, P: AsRef<Path>>(
    tuning: &[TuningChoice<T>],
    configs: &[KnnConfig<T>],
    path: P,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    writeln!(out, "{TUNING_HEADER}")?;
    for choice in tuning {
        let config = &configs[choice.config_index];
        if choice.tuned {
            for (k, rmse, predictions) in &choice.grid_report {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    choice.scenario_id,
                    choice.config_index,
                    config.min_sim,
                    config.over_common,
                    config.min_nbrs,
                    k,
                    fmt_opt(*rmse),
                    predictions,
                    k == &choice.chosen_k,
                )?;
            }
        } else {
            writeln!(
                out,
                "{},{},{},{},{},{},,,true",
                choice.scenario_id,
                choice.config_index,
                config.min_sim,
                config.over_common,
                config.min_nbrs,
                choice.chosen_k,
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cell_text<T: Real>(value: Option<T>, max: bool, star: bool) -> String {
    let Some(v) = value else {
        return "-".to_string();
    };
    let body = format!("{v:.3}");
    let starred = if star { format!("{body}*") } else { body };
    if max {
        format!("[{starred}]")
    } else {
        starred
    }
}

/// Plain-text summary table. Per scenario, the highest PopCorr, ARP, and
/// PL are bracketed; ARP/PL values significantly lower than the scenario
/// maximum carry an asterisk.
pub fn render_summary<T: Real>(rows: &[MetricsRow<T>]) -> String {
    let mut text = String::new();
    text.push_str("Popularity bias and accuracy per scenario and UserKNN configuration.\n");
    text.push_str("[x] = highest value in the scenario; * = significantly lower than the\n");
    text.push_str("highest (two-sided Mann-Whitney U on per-user samples, p < 0.005).\n\n");
    text.push_str(&format!(
        "{:<9}{:>8}{:>8}{:>10}{:>6}{:>12}{:>12}{:>14}{:>9}{:>8}{:>9}\n",
        "scenario", "min_sim", "common", "min_nbrs", "k", "PopCorr", "ARP", "PL", "AggDiv",
        "RMSE", "NDCG@10"
    ));

    let mut scenario_ids: Vec<u8> = rows.iter().map(|r| r.scenario_id).collect();
    scenario_ids.dedup();
    for scenario in scenario_ids {
        let group: Vec<&MetricsRow<T>> = rows
            .iter()
            .filter(|r| r.scenario_id == scenario)
            .collect();
        let max_pop = group
            .iter()
            .map(|r| r.pop_corr)
            .fold(T::neg_infinity(), T::max);
        let max_arp = group
            .iter()
            .filter_map(|r| r.arp)
            .fold(T::neg_infinity(), T::max);
        let max_pl = group
            .iter()
            .filter_map(|r| r.pl)
            .fold(T::neg_infinity(), T::max);
        for row in group {
            text.push_str(&format!(
                "{:<9}{:>8}{:>8}{:>10}{:>6}{:>12}{:>12}{:>14}{:>9}{:>8}{:>9}\n",
                row.scenario_id,
                format!("{}", row.config.min_sim),
                row.config.over_common,
                row.config.min_nbrs,
                row.config.k,
                cell_text(Some(row.pop_corr), row.pop_corr == max_pop, false),
                cell_text(row.arp, row.arp == Some(max_arp), row.arp_sig_lower),
                cell_text(row.pl, row.pl == Some(max_pl), row.pl_sig_lower),
                cell_text(Some(row.agg_div), false, false),
                cell_text(row.rmse, false, false),
                cell_text(row.ndcg_at_10, false, false),
            ));
        }
    }
    text
}

pub fn write_summary<T: Real, P: AsRef<Path>>(rows: &[MetricsRow<T>], path: P) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    out.write_all(render_summary(rows).as_bytes())?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<MetricsRow<f64>> {
        let c1 = KnnConfig::new(-1.0, false, 1, 20).unwrap();
        let c2 = KnnConfig::new(0.0, false, 2, 30).unwrap();
        vec![
            MetricsRow {
                scenario_id: 1,
                config: c1,
                pop_corr: 0.018,
                arp: Some(0.002),
                pl: Some(-32.285),
                agg_div: 0.4,
                rmse: Some(3.502),
                ndcg_at_10: Some(0.001),
                coverage: 0.97,
                cold_start_users: 0,
                arp_sig_lower: true,
                pl_sig_lower: true,
            },
            MetricsRow {
                scenario_id: 1,
                config: c2,
                pop_corr: 0.615,
                arp: Some(0.005),
                pl: Some(65.44),
                agg_div: 0.595,
                rmse: None,
                ndcg_at_10: None,
                coverage: 0.0,
                cold_start_users: 2,
                arp_sig_lower: false,
                pl_sig_lower: false,
            },
        ]
    }

    #[test]
    fn results_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        let rows = sample_rows();
        write_results_csv(&rows, &path).unwrap();
        let back = read_results_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].scenario_id, 1);
        assert_eq!(back[0].config, rows[0].config);
        assert!((back[0].pop_corr - 0.018).abs() < 1e-9);
        assert_eq!(back[1].rmse, None);
        assert_eq!(back[1].cold_start_users, 2);
        assert!(back[0].arp_sig_lower);
    }

    #[test]
    fn results_write_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let rows = sample_rows();
        write_results_csv(&rows, &a).unwrap();
        write_results_csv(&rows, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn summary_marks_maxima_and_significance() {
        let rows = sample_rows();
        let text = render_summary(&rows);
        // Highest PopCorr bracketed, significantly-lower ARP starred.
        assert!(text.contains("[0.615]"), "{text}");
        assert!(text.contains("0.002*"), "{text}");
        assert!(text.contains("[0.005]"), "{text}");
        // Absent RMSE renders as a dash.
        assert!(text.lines().last().unwrap().contains("-"));
    }

    #[test]
    fn malformed_results_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "not,a,results,file\n").unwrap();
        assert!(read_results_csv(&path).is_err());
        std::fs::write(&path, format!("{RESULTS_HEADER}\n")).unwrap();
        assert!(matches!(
            read_results_csv(&path).unwrap_err(),
            Error::EmptyInput
        ));
    }
}
