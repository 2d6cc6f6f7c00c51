//! On-disk formats shared by the library and the CLI: trained-bank JSON,
//! synthetic-truth JSON, sparse coefficient CSV, objective-trace CSV, and the
//! evaluation report (JSON plus a CSV twin). Every format is self-describing
//! (schema version or column header) and validated on load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::SyntheticSpec;
use crate::error::{Error, Result};
use crate::model::{CoefficientSet, ShiftPlan, SynergyBank};
use crate::recon::EvalReport;

pub const SCHEMA_VERSION: u32 = 1;

fn check_schema(version: u32, what: &str) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "{what}: unsupported schema_version {version}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Trained bank

#[derive(Debug, Serialize, Deserialize)]
struct BankFile {
    schema_version: u32,
    n: usize,
    t_s: usize,
    templates: Vec<Vec<f64>>,
    active: Vec<bool>,
}

pub fn bank_json_string(bank: &SynergyBank) -> Result<String> {
    let file = BankFile {
        schema_version: SCHEMA_VERSION,
        n: bank.joint_count(),
        t_s: bank.template_len(),
        templates: (0..bank.synergy_count())
            .map(|j| bank.template(j).to_vec())
            .collect(),
        active: (0..bank.synergy_count()).map(|j| bank.is_active(j)).collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn save_bank_json(path: impl AsRef<Path>, bank: &SynergyBank) -> Result<()> {
    fs::write(path, bank_json_string(bank)?)?;
    Ok(())
}

pub fn parse_bank_json(text: &str) -> Result<SynergyBank> {
    let file: BankFile = serde_json::from_str(text)?;
    check_schema(file.schema_version, "bank file")?;
    if file.active.len() != file.templates.len() {
        return Err(Error::dim("bank active flags", file.templates.len(), file.active.len()));
    }
    let mut bank = SynergyBank::new(file.n, file.t_s, file.templates)?;
    for (j, active) in file.active.into_iter().enumerate() {
        bank.set_active(j, active);
    }
    Ok(bank)
}

pub fn load_bank_json(path: impl AsRef<Path>) -> Result<SynergyBank> {
    parse_bank_json(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Synthetic ground truth

/// One planted activation, 1-based ids, shift in samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    pub task: usize,
    pub synergy: usize,
    pub shift: usize,
    pub amplitude: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthFile {
    schema_version: u32,
    spec: SyntheticSpec,
    n: usize,
    t: usize,
    t_s: usize,
    g: usize,
    shifts: Vec<Vec<usize>>,
    templates: Vec<Vec<f64>>,
    activations: Vec<Activation>,
}

/// The decoded contents of a truth file.
#[derive(Debug)]
pub struct SyntheticTruth {
    pub spec: SyntheticSpec,
    pub plan: ShiftPlan,
    pub bank: SynergyBank,
    pub coeffs: CoefficientSet,
    pub task_count: usize,
}

pub fn truth_json_string(
    spec: &SyntheticSpec,
    plan: &ShiftPlan,
    bank: &SynergyBank,
    coeffs: &CoefficientSet,
) -> Result<String> {
    let mut activations = Vec::new();
    for g in 0..coeffs.task_count() {
        for j in 0..coeffs.synergy_count() {
            for (k, &value) in coeffs.get(g, j).iter().enumerate() {
                if value != 0.0 {
                    activations.push(Activation {
                        task: g + 1,
                        synergy: j + 1,
                        shift: plan.shifts(j)[k],
                        amplitude: value,
                    });
                }
            }
        }
    }
    let file = TruthFile {
        schema_version: SCHEMA_VERSION,
        spec: spec.clone(),
        n: bank.joint_count(),
        t: plan.window(),
        t_s: bank.template_len(),
        g: coeffs.task_count(),
        shifts: (0..plan.synergy_count())
            .map(|j| plan.shifts(j).to_vec())
            .collect(),
        templates: (0..bank.synergy_count())
            .map(|j| bank.template(j).to_vec())
            .collect(),
        activations,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn save_truth_json(
    path: impl AsRef<Path>,
    spec: &SyntheticSpec,
    plan: &ShiftPlan,
    bank: &SynergyBank,
    coeffs: &CoefficientSet,
) -> Result<()> {
    fs::write(path, truth_json_string(spec, plan, bank, coeffs)?)?;
    Ok(())
}

pub fn parse_truth_json(text: &str) -> Result<SyntheticTruth> {
    let file: TruthFile = serde_json::from_str(text)?;
    check_schema(file.schema_version, "truth file")?;
    file.spec.validate()?;
    let plan = ShiftPlan::new(file.t, file.t_s, file.shifts)?;
    let bank = SynergyBank::new(file.n, file.t_s, file.templates)?;
    if bank.synergy_count() != plan.synergy_count() {
        return Err(Error::dim(
            "truth synergies",
            plan.synergy_count(),
            bank.synergy_count(),
        ));
    }
    let mut coeffs = CoefficientSet::zeros(file.g, &plan);
    for a in &file.activations {
        if a.task == 0 || a.task > file.g {
            return Err(Error::Input(format!("activation task {} out of range", a.task)));
        }
        if a.synergy == 0 || a.synergy > plan.synergy_count() {
            return Err(Error::Input(format!(
                "activation synergy {} out of range",
                a.synergy
            )));
        }
        if !a.amplitude.is_finite() {
            return Err(Error::Input("activation amplitude must be finite".into()));
        }
        let j = a.synergy - 1;
        let k = plan
            .shifts(j)
            .binary_search(&a.shift)
            .map_err(|_| Error::Input(format!("shift {} not in the plan for synergy {}", a.shift, a.synergy)))?;
        coeffs.get_mut(a.task - 1, j)[k] = a.amplitude;
    }
    Ok(SyntheticTruth {
        spec: file.spec,
        plan,
        bank,
        coeffs,
        task_count: file.g,
    })
}

pub fn load_truth_json(path: impl AsRef<Path>) -> Result<SyntheticTruth> {
    parse_truth_json(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Sparse coefficient CSV (zeros omitted)

const COEFFS_HEADER: &str = "task_id,synergy_id,shift,value";

pub fn coefficients_csv_string(coeffs: &CoefficientSet, plan: &ShiftPlan) -> String {
    let mut out = String::from(COEFFS_HEADER);
    out.push('\n');
    for g in 0..coeffs.task_count() {
        for j in 0..coeffs.synergy_count() {
            for (k, &value) in coeffs.get(g, j).iter().enumerate() {
                if value != 0.0 {
                    out.push_str(&format!("{},{},{},{}\n", g + 1, j + 1, plan.shifts(j)[k], value));
                }
            }
        }
    }
    out
}

pub fn save_coefficients_csv(
    path: impl AsRef<Path>,
    coeffs: &CoefficientSet,
    plan: &ShiftPlan,
) -> Result<()> {
    fs::write(path, coefficients_csv_string(coeffs, plan))?;
    Ok(())
}

/// Raw parsed coefficient rows, before binding to a shift plan.
pub fn parse_coefficients_csv(text: &str) -> Result<Vec<Activation>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file, expected coefficient header".into(),
    })?;
    if header.trim_end() != COEFFS_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {COEFFS_HEADER:?}, got {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (idx, row) in lines {
        let line = idx + 1;
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("ragged row: expected 4 fields, got {}", fields.len()),
            });
        }
        let parse_usize = |f: &str, name: &str| -> Result<usize> {
            f.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("{name} must be an integer, got {f:?}"),
            })
        };
        let task = parse_usize(fields[0], "task_id")?;
        let synergy = parse_usize(fields[1], "synergy_id")?;
        let shift = parse_usize(fields[2], "shift")?;
        let amplitude: f64 = fields[3].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("value must be numeric, got {:?}", fields[3]),
        })?;
        if task == 0 || synergy == 0 {
            return Err(Error::Parse {
                line,
                message: "task_id and synergy_id are 1-based".into(),
            });
        }
        if !amplitude.is_finite() {
            return Err(Error::Parse {
                line,
                message: "value must be finite".into(),
            });
        }
        rows.push(Activation {
            task,
            synergy,
            shift,
            amplitude,
        });
    }
    Ok(rows)
}

/// Binds parsed coefficient rows to a plan, producing a dense set.
pub fn assemble_coefficients(
    rows: &[Activation],
    plan: &ShiftPlan,
    task_count: usize,
) -> Result<CoefficientSet> {
    let mut coeffs = CoefficientSet::zeros(task_count, plan);
    for row in rows {
        if row.task > task_count {
            return Err(Error::Input(format!("task_id {} exceeds G={task_count}", row.task)));
        }
        if row.synergy > plan.synergy_count() {
            return Err(Error::Input(format!(
                "synergy_id {} exceeds m={}",
                row.synergy,
                plan.synergy_count()
            )));
        }
        let j = row.synergy - 1;
        let k = plan.shifts(j).binary_search(&row.shift).map_err(|_| {
            Error::Input(format!(
                "shift {} not in the plan for synergy {}",
                row.shift, row.synergy
            ))
        })?;
        coeffs.get_mut(row.task - 1, j)[k] = row.amplitude;
    }
    Ok(coeffs)
}

pub fn load_coefficients_csv(
    path: impl AsRef<Path>,
    plan: &ShiftPlan,
    task_count: usize,
) -> Result<CoefficientSet> {
    assemble_coefficients(&parse_coefficients_csv(&fs::read_to_string(path)?)?, plan, task_count)
}

// ---------------------------------------------------------------------------
// Objective trace CSV

pub fn trace_csv_string(trace: &[(usize, f64, usize)]) -> String {
    let mut out = String::from("iter,objective,active_count\n");
    for (iter, objective, active) in trace {
        out.push_str(&format!("{iter},{objective},{active}\n"));
    }
    out
}

// ---------------------------------------------------------------------------
// Evaluation report

#[derive(Debug, Serialize, Deserialize)]
struct ReportSummary {
    mean: Option<f64>,
    std: Option<f64>,
    columns_total: usize,
    columns_kept: usize,
    m_active: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportFile {
    schema_version: u32,
    per_task: Vec<crate::recon::TaskRecord>,
    summary: ReportSummary,
}

pub fn report_json_string(report: &EvalReport) -> Result<String> {
    let file = ReportFile {
        schema_version: SCHEMA_VERSION,
        per_task: report.per_task.clone(),
        summary: ReportSummary {
            mean: report.mean_error,
            std: report.std_error,
            columns_total: report.columns_total,
            columns_kept: report.columns_kept,
            m_active: report.m_active,
        },
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn save_report_json(path: impl AsRef<Path>, report: &EvalReport) -> Result<()> {
    fs::write(path, report_json_string(report)?)?;
    Ok(())
}

pub fn parse_report_json(text: &str) -> Result<EvalReport> {
    let file: ReportFile = serde_json::from_str(text)?;
    check_schema(file.schema_version, "report file")?;
    Ok(EvalReport {
        per_task: file.per_task,
        mean_error: file.summary.mean,
        std_error: file.summary.std,
        columns_total: file.summary.columns_total,
        columns_kept: file.summary.columns_kept,
        m_active: file.summary.m_active,
    })
}

pub fn report_csv_string(report: &EvalReport) -> String {
    let mut out = String::from("task_id,error,nnz_coeffs\n");
    for r in &report.per_task {
        out.push_str(&format!("{},{},{}\n", r.task_id, r.error, r.nnz_coeffs));
    }
    out
}

pub fn save_report_csv(path: impl AsRef<Path>, report: &EvalReport) -> Result<()> {
    fs::write(path, report_csv_string(report))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::generate_synthetic;

    fn truth_fixture() -> (SyntheticSpec, ShiftPlan, SynergyBank, CoefficientSet) {
        let spec = SyntheticSpec {
            m_true: 2,
            active_shifts_per_task: 2,
            snr_db: Some(18.0),
            amplitude_range: (0.5, 1.5),
            seed: 77,
        };
        let plan = ShiftPlan::full(12, 5, 2).unwrap();
        let (_, bank, coeffs) = generate_synthetic(&spec, 2, 12, 5, 3, &plan).unwrap();
        (spec, plan, bank, coeffs)
    }

    #[test]
    fn bank_round_trip_preserves_everything() {
        let (_, _, mut bank, _) = truth_fixture();
        bank.set_active(1, false);
        let text = bank_json_string(&bank).unwrap();
        let reloaded = parse_bank_json(&text).unwrap();
        assert_eq!(reloaded, bank);
    }

    #[test]
    fn bank_parse_rejects_bad_schema_and_shapes() {
        let bad_version = r#"{"schema_version":9,"n":1,"t_s":1,"templates":[[1.0]],"active":[true]}"#;
        assert!(matches!(parse_bank_json(bad_version), Err(Error::Config(_))));
        let bad_len = r#"{"schema_version":1,"n":2,"t_s":2,"templates":[[1.0]],"active":[true]}"#;
        assert!(parse_bank_json(bad_len).is_err());
        let bad_flags = r#"{"schema_version":1,"n":1,"t_s":1,"templates":[[1.0]],"active":[]}"#;
        assert!(parse_bank_json(bad_flags).is_err());
    }

    #[test]
    fn truth_round_trip() {
        let (spec, plan, bank, coeffs) = truth_fixture();
        let text = truth_json_string(&spec, &plan, &bank, &coeffs).unwrap();
        let truth = parse_truth_json(&text).unwrap();
        assert_eq!(truth.bank, bank);
        assert_eq!(truth.coeffs, coeffs);
        assert_eq!(truth.plan, plan);
        assert_eq!(truth.spec, spec);
    }

    #[test]
    fn coefficients_round_trip_omits_zeros() {
        let (_, plan, _, coeffs) = truth_fixture();
        let text = coefficients_csv_string(&coeffs, &plan);
        // 3 tasks x 2 planted activations + header.
        assert_eq!(text.lines().count(), 1 + 6);
        let rows = parse_coefficients_csv(&text).unwrap();
        let rebuilt = assemble_coefficients(&rows, &plan, 3).unwrap();
        assert_eq!(rebuilt, coeffs);
    }

    #[test]
    fn coefficients_parser_flags_bad_rows() {
        assert!(parse_coefficients_csv("").is_err());
        let bad_header = "a,b,c,d\n";
        assert!(matches!(
            parse_coefficients_csv(bad_header),
            Err(Error::Parse { line: 1, .. })
        ));
        let ragged = "task_id,synergy_id,shift,value\n1,1,0\n";
        assert!(matches!(
            parse_coefficients_csv(ragged),
            Err(Error::Parse { line: 2, .. })
        ));
        let zero_based = "task_id,synergy_id,shift,value\n0,1,0,1.0\n";
        assert!(parse_coefficients_csv(zero_based).is_err());
    }

    #[test]
    fn report_round_trips_including_undefined_mean() {
        let report = EvalReport {
            per_task: vec![],
            mean_error: None,
            std_error: None,
            columns_total: 10,
            columns_kept: 4,
            m_active: 2,
        };
        let text = report_json_string(&report).unwrap();
        let reloaded = parse_report_json(&text).unwrap();
        assert_eq!(reloaded, report);
        assert_eq!(report_csv_string(&report), "task_id,error,nnz_coeffs\n");
    }
}
