//! Drives the command-line front end in-process: writes a TOML config,
//! generates data and trains one model per held-out subject.

use ldgcn::cli::run_command;

fn main() {
    let dir = std::env::temp_dir().join(format!("ldgcn-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    let data = dir.join("synth.eegd").display().to_string();
    let out = dir.join("run").display().to_string();
    let config = dir.join("run.toml");
    std::fs::write(&config, "k = 4\n[train]\nepochs = 3\nbatch_size = 16\n").expect("config");

    let steps: [Vec<&str>; 2] = [
        vec!["synth", "--per-class", "20", "-o", &data],
        vec![
            "train",
            "-c",
            config.to_str().unwrap(),
            "-d",
            &data,
            "-o",
            &out,
        ],
    ];
    for args in steps {
        let code = run_command(std::iter::once("ldgcn").chain(args.iter().copied()));
        assert_eq!(code, 0, "ldgcn {args:?} failed");
    }
    let mut files: Vec<String> = std::fs::read_dir(&out)
        .expect("output dir")
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    println!("{}", files.join("\n"));
    let _ = std::fs::remove_dir_all(&dir);
}
