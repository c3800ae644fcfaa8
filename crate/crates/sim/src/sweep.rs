//! Parameter sweeps over configuration paths.

use serde_json::Value;

use crate::config::ScenarioConfig;
use crate::error::{SimError, SimResult};
use crate::experiments::{with_workers, Experiment, Scenario};
use crate::table::ResultTable;

/// Dotted paths of every numeric field (and numeric list) of the
/// configuration. List elements of structured lists are addressed by
/// index, e.g. `scene.targets.0.range_m`.
pub fn sweepable_paths(cfg: &ScenarioConfig) -> Vec<String> {
    let mut out = Vec::new();
    collect(&serde_json::to_value(cfg).expect("configuration serializes"), "", &mut out);
    out
}

fn collect(v: &Value, prefix: &str, out: &mut Vec<String>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                collect(child, &join(k), out);
            }
        }
        Value::Array(items) if !items.is_empty() && items.iter().all(Value::is_number) => out.push(prefix.to_string()),
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                collect(child, &join(&i.to_string()), out);
            }
        }
        Value::Number(_) => out.push(prefix.to_string()),
        _ => {}
    }
}

/// Copy of `cfg` with the field at `path` set to `value` (a numeric list
/// becomes the single-element list `[value]`). The result is validated.
pub fn with_value(cfg: &ScenarioConfig, path: &str, value: f64) -> SimResult<ScenarioConfig> {
    let valid = sweepable_paths(cfg);
    if !valid.iter().any(|p| p == path) {
        return Err(SimError::UnknownVariable {
            path: path.to_string(),
            valid,
        });
    }
    let mut root = serde_json::to_value(cfg)?;
    let pointer = format!("/{}", path.replace('.', "/"));
    let slot = root.pointer_mut(&pointer).expect("path was listed as sweepable");
    let number = |integral: bool| -> SimResult<Value> {
        if integral {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(SimError::Validation(vec![format!("{path} needs a non-negative integer, got {value}")]));
            }
            Ok(Value::from(value as u64))
        } else {
            Ok(serde_json::Number::from_f64(value)
                .map(Value::Number)
                .ok_or_else(|| SimError::Validation(vec![format!("{path}: {value} is not finite")]))?)
        }
    };
    *slot = match slot {
        Value::Array(items) => {
            let integral = items.iter().all(|i| i.is_u64());
            Value::Array(vec![number(integral)?])
        }
        Value::Number(n) => number(n.is_u64())?,
        _ => unreachable!("only numeric paths are sweepable"),
    };
    let out: ScenarioConfig = serde_json::from_value(root)?;
    out.validate()?;
    Ok(out)
}

/// Runs `experiment` once per value of `path` and concatenates the tables.
/// Rows whose own variable is not the swept one are re-keyed to the swept
/// value, with the original coordinate appended to the metric name.
pub fn sweep(
    cfg: &ScenarioConfig,
    experiment: Experiment,
    path: &str,
    values: &[f64],
    workers: usize,
) -> SimResult<ResultTable> {
    let configs = values
        .iter()
        .map(|&v| with_value(cfg, path, v))
        .collect::<SimResult<Vec<_>>>()?;
    if values.is_empty() {
        // still reject unknown paths
        with_value(cfg, path, 0.0).map(|_| ()).or_else(|e| match e {
            SimError::UnknownVariable { .. } => Err(e),
            _ => Ok(()),
        })?;
    }
    let leaf = path.rsplit('.').next().unwrap_or(path);
    let mut table = ResultTable::new();
    for (c, &v) in configs.into_iter().zip(values) {
        let scenario = Scenario::new(c)?;
        let out = with_workers(workers, || scenario.run(experiment))?;
        for mut row in out.table.rows {
            if row.variable != leaf {
                row.metric = format!("{}@{}={}", row.metric, row.variable, row.x);
                row.variable = path.to_string();
                row.x = v;
            }
            table.rows.push(row);
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_include_nested_fields() {
        let p = sweepable_paths(&ScenarioConfig::default());
        for want in ["seed", "codebook.code_len", "scene.snr_db", "scene.targets.1.range_m", "comm.snr_db"] {
            assert!(p.iter().any(|x| x == want), "{want} missing");
        }
        assert!(!p.iter().any(|x| x == "output.dir"));
    }

    #[test]
    fn setting_values() {
        let base = ScenarioConfig::default();
        let c = with_value(&base, "codebook.code_len", 20.0).unwrap();
        assert_eq!(c.codebook.code_len, 20);
        let c = with_value(&base, "scene.snr_db", 15.0).unwrap();
        assert_eq!(c.scene.snr_db, vec![15.0]);
        let c = with_value(&base, "scene.targets.0.range_m", 50.0).unwrap();
        assert_eq!(c.scene.targets[0].range_m, 50.0);
    }

    #[test]
    fn bad_values_rejected() {
        let base = ScenarioConfig::default();
        assert!(matches!(with_value(&base, "codebook.code_len", 20.5), Err(SimError::Validation(_))));
        assert!(matches!(with_value(&base, "codebook.code_len", 33.0), Err(SimError::Validation(_))));
        match with_value(&base, "codebook.nope", 1.0) {
            Err(SimError::UnknownVariable { valid, .. }) => assert!(valid.len() > 20),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_sweep_is_empty_table() {
        let t = sweep(&ScenarioConfig::default(), Experiment::Fig7, "codebook.code_len", &[], 1).unwrap();
        assert!(t.is_empty());
        assert!(sweep(&ScenarioConfig::default(), Experiment::Fig7, "x.y", &[], 1).is_err());
    }
}
