//! Drives the command-line entry point in-process and lists the artifacts.

fn main() {
    let out = std::env::temp_dir().join("agmon-example");
    let out = out.to_str().expect("utf-8 path");
    let code = agmon::cli::run(["agmon", "--out", out, "all", "--quick", "--only", "1,2,6,7,12"]);
    println!("exit code {code}");
    for e in std::fs::read_dir(out).expect("output directory").flatten() {
        println!("  {}", e.file_name().to_string_lossy());
    }
}
