use std::str::FromStr;

use multiboson::bethe::{cross_validate, solve_bethe, solve_direct, SolverConfig};
use multiboson::diffop::expand_diffop;
use multiboson::fock::{sector_from_occupations, Coupling};
use multiboson::models::{verify_preset, PresetId};
use multiboson::polyalg::{casimir_value, verify_single_mode};
use multiboson::scalar::{int, rational, rational_to_f64};
use multiboson::{ModelSpec, Rational, Sector};
use num_traits::Signed;
use rayon::prelude::*;

use crate::config::{parse_rational, ConfigError, Resolved};
use crate::output::{num, Table};
use crate::CliError;

/// A table plus whether every check in it passed.
pub struct Outcome {
    pub tables: Vec<Table>,
    pub pass: bool,
    pub failures: Vec<String>,
}

fn sector_of(model: &ModelSpec<Rational>, occ: &[u64]) -> Result<Sector, CliError> {
    sector_from_occupations(model, occ).map_err(|e| ConfigError::field("sector.occ", e.to_string()).into())
}

const SOLVE_COLUMNS: &[&str] = &[
    "level",
    "oracle_energy",
    "bethe_energy",
    "abs_delta",
    "residual_robust",
    "residual_product",
    "source",
    "accepted",
    "root_index",
    "root_re",
    "root_im",
];

pub fn solve(res: &Resolved, config: &SolverConfig) -> Result<Outcome, CliError> {
    let sector = sector_of(&res.model, &res.occupations)?;
    let report = cross_validate(&res.model, &sector, config)?;
    let mut failures = report.failures.clone();
    let mut table = Table::new("solve", SOLVE_COLUMNS);
    if let Some(id) = res.preset {
        table.meta("preset", id);
    }
    table.meta("sector", &report.sector);
    table.meta("N", sector.n_max());
    table.meta("max_energy_error", num(report.max_energy_error));
    table.meta("max_residual", num(report.max_residual));

    for level in &report.levels {
        let head = vec![
            level.level.to_string(),
            num(level.fock_energy),
            num(level.bethe_energy),
            num((level.bethe_energy - level.fock_energy).abs()),
            num(level.residual_robust),
            level.residual_product.map(num).unwrap_or_default(),
            level.source.to_string(),
            level.accepted.to_string(),
        ];
        if level.roots.is_empty() {
            table.push([head.clone(), vec![String::new(); 3]].concat());
        }
        for (i, z) in level.roots.iter().enumerate() {
            table.push([head.clone(), vec![i.to_string(), num(z.re), num(z.im)]].concat());
        }
    }

    if config.direct {
        let extracted = solve_bethe(&res.model, &sector, config)?;
        let direct = solve_direct(&res.model, &sector, config, &extracted)?;
        table.meta("direct_solutions", direct.solutions.len());
        table.meta("direct_subset", direct.is_subset());
        if !direct.is_subset() {
            failures.push("direct search found roots outside the extracted set".into());
        }
    }
    table.meta("pass", failures.is_empty());
    Ok(Outcome { pass: failures.is_empty(), tables: vec![table], failures })
}

/// `a:b:step` with exact endpoints; includes `b` when it lies on the grid.
pub fn parse_range(text: &str) -> Result<Vec<Rational>, ConfigError> {
    let field = "range";
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, step] = parts.as_slice() else {
        return Err(ConfigError::field(field, format!("'{text}' is not of the form start:stop:step")));
    };
    let parse = |v: &str| parse_rational(v).ok_or_else(|| ConfigError::field(field, format!("'{v}' is not a number")));
    let (a, b, step) = (parse(a)?, parse(b)?, parse(step)?);
    if !step.is_positive() {
        return Err(ConfigError::field(field, "step must be positive"));
    }
    if b < a {
        return Err(ConfigError::field(field, "stop is below start"));
    }
    let count = ((&b - &a) / &step).floor();
    let count = multiboson::scalar::to_integer(&count).filter(|&c| c < 1_000_000).ok_or_else(|| ConfigError::field(field, "too many grid points"))?;
    Ok((0..=count).map(|i| &a + &step * int(i)).collect())
}

/// `g`, `w.<i>` or `wq.<i>.<j>`, with 1-based mode indices.
pub fn parse_coupling(text: &str, modes: usize) -> Result<Coupling, ConfigError> {
    let field = "coupling";
    let bad = || ConfigError::field(field, format!("'{text}' is not g, w.<i> or wq.<i>.<j> with indices in 1..={modes}"));
    let index = |v: &str| usize::from_str(v).ok().filter(|&i| (1..=modes).contains(&i)).map(|i| i - 1);
    let parts: Vec<&str> = text.trim().split('.').collect();
    match parts.as_slice() {
        ["g"] => Ok(Coupling::Interaction),
        ["w", i] => Ok(Coupling::Linear(index(i).ok_or_else(bad)?)),
        ["wq", i, j] => Ok(Coupling::Quadratic(index(i).ok_or_else(bad)?, index(j).ok_or_else(bad)?)),
        _ => Err(bad()),
    }
}

fn coupling_name(c: Coupling) -> String {
    match c {
        Coupling::Interaction => "g".into(),
        Coupling::Linear(i) => format!("w.{}", i + 1),
        Coupling::Quadratic(i, j) => format!("wq.{}.{}", i + 1, j + 1),
    }
}

pub fn scan(res: &Resolved, coupling: Coupling, grid: &[Rational], config: &SolverConfig) -> Result<Outcome, CliError> {
    let sector = sector_of(&res.model, &res.occupations)?;
    let name = coupling_name(coupling);
    let points: Vec<Result<_, CliError>> = grid
        .par_iter()
        .map(|value| {
            let model = res.model.with_coupling(coupling, value.clone()).map_err(|e| ConfigError::field("coupling", e.to_string()))?;
            Ok((value, cross_validate(&model, &sector, config)?))
        })
        .collect();

    let mut table = Table::new(
        "scan",
        &["parameter", "value", "level", "energy", "bethe_energy", "abs_delta", "residual_robust", "accepted"],
    );
    table.meta("base", format!("{:?}", sector.base_occupations()));
    table.meta("points", grid.len());
    let mut failures = Vec::new();
    for point in points {
        let (value, report) = point?;
        let v = num(rational_to_f64(value));
        failures.extend(report.failures.iter().map(|f| format!("{name} = {v}: {f}")));
        for level in &report.levels {
            table.push(vec![
                name.clone(),
                v.clone(),
                level.level.to_string(),
                num(level.fock_energy),
                num(level.bethe_energy),
                num((level.bethe_energy - level.fock_energy).abs()),
                num(level.residual_robust),
                level.accepted.to_string(),
            ]);
        }
    }
    table.meta("pass", failures.is_empty());
    Ok(Outcome { pass: failures.is_empty(), tables: vec![table], failures })
}

pub fn verify_algebra(kmax: u32, trunc: Option<usize>, tol: f64) -> Outcome {
    let mut table = Table::new("verify-algebra", &["k", "identity", "max_error", "status"]);
    let mut failures = Vec::new();
    for k in 1..=kmax {
        let cutoff = trunc.unwrap_or(6 * k as usize + 6).max(6 * k as usize);
        for check in verify_single_mode(k, cutoff, tol) {
            if !check.pass {
                failures.push(format!("k = {k}: {}", check.identity));
            }
            table.push(vec![k.to_string(), check.identity.into(), num(check.max_error), status(check.pass)]);
        }
    }
    if kmax >= 2 {
        let c = casimir_value(2);
        let pass = c == rational(3, 16);
        if !pass {
            failures.push(format!("k = 2: Casimir is {c}, expected 3/16"));
        }
        let err = rational_to_f64(&(c - rational(3, 16))).abs();
        table.push(vec!["2".into(), "Casimir value = 3/16 exactly".into(), num(err), status(pass)]);
    }
    table.meta("pass", failures.is_empty());
    Outcome { pass: failures.is_empty(), tables: vec![table], failures }
}

fn status(pass: bool) -> String {
    if pass { "pass" } else { "FAIL" }.into()
}

pub fn verify_presets(case: Option<PresetId>, draws: usize, seed: u64) -> Result<Outcome, CliError> {
    let mut table = Table::new("verify-presets", &["case", "check", "kind", "status", "agreed", "draws", "example", "note"]);
    let mut failures = Vec::new();
    let ids: Vec<PresetId> = match case {
        Some(id) => vec![id],
        None => PresetId::ALL.to_vec(),
    };
    for id in ids {
        let report = verify_preset(id, draws, seed)?;
        for check in &report.checks {
            if check.status == multiboson::models::CheckStatus::Mismatch {
                failures.push(format!("case {id}: {} agreed in {}/{} draws", check.name, check.agreed, check.draws));
            }
            table.push(vec![
                id.to_string(),
                check.name.clone(),
                format!("{:?}", check.kind).to_lowercase(),
                check.status.to_string(),
                check.agreed.to_string(),
                check.draws.to_string(),
                check.example.clone().unwrap_or_default(),
                check.note.unwrap_or_default().to_string(),
            ]);
        }
    }
    table.meta("pass", failures.is_empty());
    Ok(Outcome { pass: failures.is_empty(), tables: vec![table], failures })
}

pub fn roots(res: &Resolved, config: &SolverConfig, dump_diffop: bool) -> Result<Outcome, CliError> {
    let sector = sector_of(&res.model, &res.occupations)?;
    let solutions = solve_bethe(&res.model, &sector, config)?;
    let mut table = Table::new("roots", &["level", "energy", "residual_robust", "root_index", "root_re", "root_im"]);
    table.meta("N", sector.n_max());
    let mut failures = Vec::new();
    for sol in &solutions {
        if sol.residual_robust > config.accept_tol {
            failures.push(format!("level {}: residual {:e}", sol.level, sol.residual_robust));
        }
        let head = vec![sol.level.to_string(), num(sol.energy), num(sol.residual_robust)];
        if sol.roots.is_empty() {
            table.push([head.clone(), vec![String::new(); 3]].concat());
        }
        for (i, z) in sol.roots.iter().enumerate() {
            table.push([head.clone(), vec![i.to_string(), num(z.re), num(z.im)]].concat());
        }
    }
    table.meta("pass", failures.is_empty());
    let mut tables = Vec::new();
    if dump_diffop {
        let op = expand_diffop(&res.model, &sector);
        let mut dump = Table::new("diffop", &[]);
        dump.meta("order", op.order);
        dump.meta("N", op.n_max);
        for (i, p) in op.p.iter().enumerate() {
            let coeffs: Vec<String> = if p.coeffs().is_empty() {
                vec![num(0.0)]
            } else {
                p.coeffs().iter().map(|c| num(rational_to_f64(c))).collect()
            };
            dump.meta(&format!("P{i}"), coeffs.join(" "));
        }
        tables.push(dump);
    }
    tables.push(table);
    Ok(Outcome { pass: failures.is_empty(), tables, failures })
}
