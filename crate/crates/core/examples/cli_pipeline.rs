//! Drives the `fdid` command line in process: simulate a dataset, estimate,
//! and verify the roadmap, writing outputs under a temporary directory.

fn main() {
    let dir = std::env::temp_dir().join("fdid-cli-pipeline");
    let config = dir.join("config.json");
    std::fs::create_dir_all(&dir).expect("create output directory");
    std::fs::write(
        &config,
        r#"{"strata":[{"prob":1,"propensity":0.4}],"beta_z":1,"gamma":2,"noise_sd":1,"n":1500}"#,
    )
    .expect("write config");

    let d = dir.display();
    let steps = [
        format!("fdid simulate --config {} --seed 1 --out {d}/sim", config.display()),
        format!("fdid estimate --input {d}/sim/data.csv --bootstrap 499 --seed 1 --out {d}/est"),
        format!("fdid verify --seed 1 --out {d}/verify"),
    ];
    let mut out = std::io::stdout();
    let mut err = std::io::stderr();
    for step in &steps {
        println!("$ {step}");
        let code = fdid::cli::run(step.split_whitespace(), &mut out, &mut err);
        if code != 0 {
            std::process::exit(code);
        }
    }
    println!("outputs in {d}");
}
