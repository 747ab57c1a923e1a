fn main() {
    std::process::exit(agmon::cli::run(std::env::args_os()));
}
