use std::path::Path;

use serde_json::Value;
use suggestive::active::{check_comparable, run_simulation, ComparisonTable, SimulationConfig, SimulationLog};
use suggestive::boundary::effort_report;
use suggestive::fsutil::write_atomic;
use suggestive::metrics::{average_bvsb, dice_report, DiceReport};
use suggestive::phantom::{generate_benchmark, PhantomSpec, MANIFEST_FILE};
use suggestive::tensor::{
    encode_pgm, load_labels, load_manifest, load_pgm, load_probmap, load_tensor, save_tensor, PgmKind,
};
use suggestive::{Error, Result};

use crate::{BvsbArgs, ConvertArgs, EffortArgs, Kind, PairArgs, PhantomArgs, SimulateArgs};

pub fn phantom(a: &PhantomArgs) -> Result<String> {
    let spec = PhantomSpec {
        size: a.size,
        seed: a.seed,
        noise_sigma: a.noise,
        ..Default::default()
    };
    generate_benchmark(&spec, a.labeled, a.pool, a.test, &a.out)?;
    Ok(format!("{}\n", a.out.join(MANIFEST_FILE).display()))
}

pub fn dice(a: &PairArgs) -> Result<String> {
    let report = dice_report(&load_labels(&a.pred)?, &load_labels(&a.gt)?)?;
    Ok(format!("{}\n{}\n", DiceReport::CSV_HEADER, report.to_csv_row()))
}

pub fn bvsb(a: &BvsbArgs) -> Result<String> {
    let mut scored = a
        .probmaps
        .iter()
        .map(|p| Ok((p, average_bvsb(&load_probmap(p)?))))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|x, y| x.1.total_cmp(&y.1).then_with(|| x.0.cmp(y.0)));
    Ok(scored.iter().map(|(p, s)| format!("{},{s}\n", p.display())).collect())
}

pub fn effort(a: &EffortArgs) -> Result<String> {
    let report = effort_report(&load_labels(&a.pair.gt)?, &load_labels(&a.pair.pred)?, a.tol)?;
    Ok(report.to_csv())
}

/// The config file mirrors `SimulationConfig`; `strategy` may also be a list of two strategies.
fn read_configs(path: &Path) -> Result<Vec<SimulationConfig>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let value: Value = serde_json::from_str(&text)?;
    let strategies = match value.get("strategy") {
        Some(Value::Array(list)) => list.clone(),
        Some(single) => vec![single.clone()],
        None => return Err(Error::Config("config is missing \"strategy\"".into())),
    };
    if strategies.is_empty() || strategies.len() > 2 {
        return Err(Error::Config("strategy list must name one or two strategies".into()));
    }
    let configs = strategies
        .into_iter()
        .map(|s| {
            let mut v = value.clone();
            v["strategy"] = s;
            let cfg: SimulationConfig = serde_json::from_value(v)?;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    if let [a, b] = configs.as_slice() {
        check_comparable(a, b)?;
        if a.strategy == b.strategy {
            return Err(Error::Config("compare mode needs two different strategies".into()));
        }
    }
    Ok(configs)
}

pub fn simulate(a: &SimulateArgs) -> Result<String> {
    let manifest = load_manifest(&a.manifest)?;
    let configs = read_configs(&a.config)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    let mut logs: Vec<SimulationLog> = Vec::new();
    for cfg in &configs {
        let model = a.out.join(format!("{}_model.sgm", cfg.strategy.name()));
        logs.push(run_simulation(&manifest, cfg, Some(&model))?);
    }
    let mut outputs: Vec<(String, String)> = Vec::new();
    for log in &logs {
        let name = log.config.strategy.name();
        outputs.push((format!("{name}_log.json"), log.to_json()));
        outputs.push((format!("{name}_iterations.csv"), log.iterations_csv()));
        outputs.push((format!("{name}_effort.csv"), log.effort_csv()));
    }
    if let [first, second] = logs.as_slice() {
        let (bvsb, random) = if first.config.strategy.name() == "bvsb" {
            (first, second)
        } else {
            (second, first)
        };
        outputs.push((
            "comparison.csv".into(),
            ComparisonTable::from_logs(bvsb, random).to_csv(),
        ));
    }
    let mut stdout = String::new();
    for (file, body) in &outputs {
        let path = a.out.join(file);
        write_atomic(&path, body.as_bytes())?;
        stdout.push_str(&format!("{}\n", path.display()));
    }
    Ok(stdout)
}

pub fn convert(a: &ConvertArgs) -> Result<String> {
    if let Some(pgm) = &a.pgm {
        let kind = match a.kind {
            Kind::Volume => PgmKind::Volume,
            Kind::Labelmap => PgmKind::LabelMap,
        };
        save_tensor(&load_pgm(pgm, kind)?, &a.out)?;
    } else if let Some(vtf) = &a.vtf {
        write_atomic(&a.out, &encode_pgm(&load_tensor(vtf)?)?)?;
    }
    Ok(format!("{}\n", a.out.display()))
}
