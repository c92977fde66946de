use std::fs;
use std::path::{Path, PathBuf};

use diffggm::eval::{
    derive_seed, permutation_agreement, permutation_test, power_curve, run_replicates, EvalReport,
    PermutationResult, ReplicateOutcome,
};
use diffggm::ggm::{nodewise, other_node, select_edges, NodewiseResult};
use diffggm::simulate::{sample_dataset, GgmPair};
use diffggm::{standardize, SampleMatrix};
use ndarray::Array2;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::data::{aligned, format_matrix, format_rows, read_table};
use crate::error::{CliError, CliResult};

struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
        })
    }

    fn write(&self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
    }

    fn json(&self, name: &str, value: &Value) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("json serializes");
        text.push('\n');
        self.write(name, &text)
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn fixed(v: f64, digits: usize) -> String {
    format!("{v:.digits$}")
}

fn matrix_json(m: &Array2<f64>) -> Value {
    Value::Array(m.rows().into_iter().map(|r| json!(r.to_vec())).collect())
}

fn edges_json(edges: &[(usize, usize)]) -> Value {
    Value::Array(edges.iter().map(|&(i, j)| json!([i, j])).collect())
}

pub fn run(cfg: &RunConfig, output_dir: &Path) -> CliResult<()> {
    let mut out = Outputs::new(output_dir)?;
    match cfg.command.as_str() {
        "simulate" => simulate(cfg, &mut out)?,
        "test" => test(cfg, &mut out)?,
        "benchmark" => benchmark(cfg, &mut out)?,
        "power-curve" => curve(cfg, &mut out)?,
        "permute" => permute(cfg, &mut out)?,
        other => return Err(CliError::Config(format!("unknown command '{other}'"))),
    }
    out.write("manifest.json", &cfg.manifest_json())
}

fn variable_names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("v{j}")).collect()
}

fn simulate(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let (pair, x1, x2) = cfg.scenario().draw(cfg.seed)?;
    let names = variable_names(cfg.p);
    out.write("group_a.csv", &format_matrix(Some(&names), &x1.into_data()))?;
    out.write("group_b.csv", &format_matrix(Some(&names), &x2.into_data()))?;
    out.json("truth.json", &truth_json(cfg, &pair))?;
    let rows = vec![
        vec!["variables".into(), cfg.p.to_string()],
        vec!["samples (a, b)".into(), format!("{}, {}", cfg.n1, cfg.n2)],
        vec![
            "edges (a, b)".into(),
            format!("{}, {}", pair.s1.len(), pair.s2.len()),
        ],
        vec!["difference edges".into(), pair.sd.len().to_string()],
        vec!["seed".into(), cfg.seed.to_string()],
    ];
    out.write("summary.txt", &aligned(&["quantity", "value"], &rows))
}

fn truth_json(cfg: &RunConfig, pair: &GgmPair) -> Value {
    json!({
        "p": cfg.p,
        "n1": cfg.n1,
        "n2": cfg.n2,
        "sparsity": cfg.sparsity,
        "diff_sparsity": cfg.diff_sparsity,
        "seed": cfg.seed,
        "graph_seed": pair.seed,
        "support_a": edges_json(&pair.s1),
        "support_b": edges_json(&pair.s2),
        "support_difference": edges_json(&pair.sd),
        "precision_a": matrix_json(&pair.theta1),
        "precision_b": matrix_json(&pair.theta2),
    })
}

fn load_inputs(cfg: &RunConfig) -> CliResult<(Vec<String>, SampleMatrix, SampleMatrix)> {
    let (pa, pb) = (
        cfg.input_a.as_ref().expect("validated"),
        cfg.input_b.as_ref().expect("validated"),
    );
    let (a, b) = (read_table(pa)?, read_table(pb)?);
    if a.values.ncols() != b.values.ncols() {
        return Err(CliError::Data(format!(
            "{} has {} columns but {} has {}",
            pa.display(),
            a.values.ncols(),
            pb.display(),
            b.values.ncols()
        )));
    }
    if a.values.ncols() < 2 {
        return Err(CliError::Data("need at least two variables".into()));
    }
    let folds = cfg.cv_folds;
    for (path, t) in [(pa, &a), (pb, &b)] {
        if t.values.nrows() < 2 * folds {
            return Err(CliError::Data(format!(
                "{}: {} rows, but {folds}-fold cross-validation needs at least {}",
                path.display(),
                t.values.nrows(),
                2 * folds
            )));
        }
    }
    let std = |path: &PathBuf, v: &Array2<f64>| {
        standardize(v.view()).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    };
    Ok((a.names.clone(), std(pa, &a.values)?, std(pb, &b.values)?))
}

fn selected_rows(result: &NodewiseResult, names: &[String], cfg: &RunConfig) -> Vec<Vec<String>> {
    let sel = select_edges(&result.stats, cfg.alpha, cfg.correction.into());
    let mut rows = Vec::new();
    for ((v, col), &hit) in sel.indexed_iter() {
        if hit {
            let j = other_node(v, col);
            rows.push(vec![
                v.to_string(),
                j.to_string(),
                names[v].clone(),
                names[j].clone(),
                num(result.stats.b[[v, col]]),
                num(result.stats.pvals[[v, col]]),
            ]);
        }
    }
    rows
}

fn test(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let (names, x1, x2) = load_inputs(cfg)?;
    let ncfg = cfg.nodewise();
    let mut per_method = Vec::new();
    let mut summary = Vec::new();
    for method in cfg.method.methods() {
        let result = nodewise(&x1, &x2, method, &ncfg)?;
        let tag = method.tag();
        let selected = selected_rows(&result, &names, cfg);
        out.write(
            &format!("z_{tag}.csv"),
            &format_matrix(None, &result.stats.b),
        )?;
        out.write(
            &format!("pvalues_{tag}.csv"),
            &format_matrix(None, &result.stats.pvals),
        )?;
        out.write(
            &format!("selected_{tag}.csv"),
            &format_rows(
                &["node", "neighbor", "node_name", "neighbor_name", "z", "p"],
                &selected,
            ),
        )?;
        let nodes: Vec<Value> = result
            .nodes
            .iter()
            .map(|d| {
                json!({
                    "node": d.node,
                    "noise": [d.noise.sigma1, d.noise.sigma2],
                    "lambdas": [d.lambdas.0, d.lambdas.1],
                    "multipliers": [d.multipliers.0, d.multipliers.1],
                    "budgets": [d.debias.mu1, d.debias.mu2],
                    "relaxations": d.debias.relaxations,
                })
            })
            .collect();
        per_method.push(json!({
            "method": tag,
            "selected": selected.len(),
            "z": matrix_json(&result.stats.b),
            "pvalues": matrix_json(&result.stats.pvals),
            "nodes": nodes,
        }));
        summary.push(vec![
            method.to_string(),
            selected.len().to_string(),
            (x1.p() * (x1.p() - 1)).to_string(),
            fixed(result.stats.b.iter().fold(0.0f64, |m, z| m.max(z.abs())), 3),
        ]);
    }
    out.json(
        "report.json",
        &json!({
            "command": "test",
            "variables": names,
            "samples": [x1.n(), x2.n()],
            "alpha": cfg.alpha,
            "correction": cfg.correction,
            "layout": "row v lists tests for every other node j in increasing order, skipping v",
            "methods": per_method,
        }),
    )?;
    let mut text = format!(
        "{} variables, {} and {} samples, alpha {}, correction {}\n\n",
        names.len(),
        x1.n(),
        x2.n(),
        cfg.alpha,
        cfg.correction
    );
    text.push_str(&aligned(
        &["method", "selected", "tests", "max |z|"],
        &summary,
    ));
    out.write("summary.txt", &text)
}

fn report_row(r: &EvalReport) -> Vec<String> {
    vec![
        r.method.tag().to_string(),
        num(r.fp_rate),
        num(r.power),
        num(r.coverage_s),
        num(r.coverage_sdc),
        num(r.len_s),
        num(r.len_sdc),
        r.replicates.to_string(),
        num(r.power_se),
        num(r.fp_se),
    ]
}

fn pct(v: f64) -> String {
    format!("{:.1}%", 100.0 * v)
}

fn benchmark(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let methods = cfg.method.methods();
    let runs = run_replicates(
        &cfg.scenario(),
        &methods,
        cfg.replicates,
        &cfg.nodewise(),
        cfg.seed,
    )?;
    let flat: Vec<ReplicateOutcome> = runs.iter().flatten().cloned().collect();
    let reports: Vec<EvalReport> = methods
        .iter()
        .map(|&m| EvalReport::from_outcomes(m, &flat))
        .collect::<Result<_, _>>()?;
    let header = [
        "method",
        "fp_rate",
        "power",
        "coverage_s",
        "coverage_sdc",
        "len_s",
        "len_sdc",
        "replicates",
        "power_se",
        "fp_se",
    ];
    out.write(
        "benchmark.csv",
        &format_rows(&header, &reports.iter().map(report_row).collect::<Vec<_>>()),
    )?;
    let rep_rows: Vec<Vec<String>> = runs
        .iter()
        .enumerate()
        .flat_map(|(r, outcomes)| {
            outcomes.iter().map(move |o| {
                vec![
                    r.to_string(),
                    o.method.tag().to_string(),
                    o.edges.null_total.to_string(),
                    o.edges.null_rejected.to_string(),
                    o.edges.diff_total.to_string(),
                    o.edges.diff_rejected.to_string(),
                    num(o.edges.fp_rate()),
                    num(o.edges.power()),
                    num(o.max_delta),
                    o.relaxations.to_string(),
                ]
            })
        })
        .collect();
    out.write(
        "replicates.csv",
        &format_rows(
            &[
                "replicate",
                "method",
                "null_total",
                "null_rejected",
                "diff_total",
                "diff_rejected",
                "fp_rate",
                "power",
                "max_delta",
                "relaxations",
            ],
            &rep_rows,
        ),
    )?;
    out.json(
        "report.json",
        &json!({ "command": "benchmark", "scenario": cfg.scenario(), "replicates": cfg.replicates, "reports": reports }),
    )?;
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.method.to_string(),
                pct(r.fp_rate),
                pct(r.power),
                pct(r.coverage_s),
                pct(r.coverage_sdc),
                fixed(r.len_s, 3),
                fixed(r.len_sdc, 3),
            ]
        })
        .collect();
    let mut text = format!(
        "p = {}, n1 = {}, n2 = {}, sparsity {}, difference sparsity {}, alpha {}, {} replicates\n\n",
        cfg.p, cfg.n1, cfg.n2, cfg.sparsity, cfg.diff_sparsity, cfg.alpha, cfg.replicates
    );
    text.push_str(&aligned(
        &["method", "FP", "TP", "Cov S", "Cov Sdc", "len S", "len Sdc"],
        &rows,
    ));
    out.write("summary.txt", &text)
}

fn curve(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let methods = cfg.method.methods();
    let points = power_curve(
        &cfg.scenario(),
        &cfg.n2_grid,
        &methods,
        cfg.replicates,
        &cfg.nodewise(),
        cfg.seed,
    )?;
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|pt| {
            vec![
                pt.n2.to_string(),
                pt.method.tag().to_string(),
                num(pt.power),
                num(pt.power_se),
                num(pt.fp_rate),
                pt.replicates.to_string(),
            ]
        })
        .collect();
    out.write(
        "power_curve.csv",
        &format_rows(
            &["n2", "method", "power", "power_se", "fp_rate", "replicates"],
            &rows,
        ),
    )?;
    out.json(
        "report.json",
        &json!({ "command": "power-curve", "scenario": cfg.scenario(), "points": points }),
    )?;
    let pretty: Vec<Vec<String>> = points
        .iter()
        .map(|pt| {
            vec![
                pt.n2.to_string(),
                pt.method.to_string(),
                pct(pt.power),
                fixed(pt.power_se, 3),
                pct(pt.fp_rate),
            ]
        })
        .collect();
    out.write(
        "summary.txt",
        &aligned(&["n2", "method", "power", "se", "FP"], &pretty),
    )
}

fn permute(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let (source, x1, x2) = if cfg.input_a.is_some() {
        let (_, a, b) = load_inputs(cfg)?;
        ("input", a, b)
    } else {
        let scn = diffggm::eval::Scenario {
            diff_sparsity: 0.0,
            ..cfg.scenario()
        };
        let pair = diffggm::simulate::generate_ggm_pair(
            scn.p,
            scn.sparsity,
            0.0,
            derive_seed(cfg.seed, 0),
        )?;
        let (a, b) = sample_dataset(&pair, scn.n1, scn.n2, derive_seed(cfg.seed, 1))?;
        ("simulated null", a, b)
    };
    let ncfg = cfg.nodewise();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut pretty = Vec::new();
    for method in cfg.method.methods() {
        let res: PermutationResult = permutation_test(
            &x1,
            &x2,
            method,
            cfg.permutations,
            &ncfg,
            derive_seed(cfg.seed, 2),
        )?;
        for ((v, col), &perm) in res.pvals.indexed_iter() {
            rows.push(vec![
                method.tag().to_string(),
                v.to_string(),
                other_node(v, col).to_string(),
                num(res.observed.b[[v, col]]),
                num(res.observed.pvals[[v, col]]),
                num(perm),
            ]);
        }
        let agree = permutation_agreement(&res, cfg.alpha);
        pretty.push(vec![
            method.to_string(),
            agree.entries.to_string(),
            pct(agree.parametric_rejections),
            pct(agree.permutation_rejections),
            pct(agree.anti_conservative),
        ]);
        summaries.push(json!({ "method": method.tag(), "agreement": agree }));
    }
    out.write(
        "permutation.csv",
        &format_rows(
            &[
                "method",
                "node",
                "neighbor",
                "z",
                "parametric_p",
                "permutation_p",
            ],
            &rows,
        ),
    )?;
    out.json(
        "report.json",
        &json!({
            "command": "permute",
            "data": source,
            "permutations": cfg.permutations,
            "alpha": cfg.alpha,
            "methods": summaries,
        }),
    )?;
    let mut text = format!(
        "{} permutations on {} data, alpha {}\n\n",
        cfg.permutations, source, cfg.alpha
    );
    text.push_str(&aligned(
        &[
            "method",
            "entries",
            "parametric <= alpha",
            "permutation <= alpha",
            "anti-conservative",
        ],
        &pretty,
    ));
    out.write("summary.txt", &text)
}
